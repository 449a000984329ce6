/*
 * Copyright 2026 The espsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <functional>
#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "espsim/config.hpp"
#include "espsim/dram.hpp"
#include "espsim/message.hpp"

namespace espsim {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Memory tile owning each DRAM address.
struct HomeMap {
  std::vector<Partition> partitions;

  TileId home(Addr a) const;
};

/// One protocol state change, for the debug trace.
struct Transition {
  Cycle cycle = 0;
  TileId controller = kNoTile;
  const char* kind = "";  // "L2" or "LLC"
  Addr line = 0;
  std::string_view from;
  std::string event;
  std::string_view to;
  int messages_out = 0;
};

using TransitionHook = std::function<void(const Transition&)>;

/// Outgoing messages, one FIFO per message class so a blocked class never
/// holds up another.
class Outbox {
 public:
  void push(Message m) { q_[static_cast<std::size_t>(class_of(m.type))].push_back(std::move(m)); }
  std::vector<Message>& queue(MessageClass c) { return q_[static_cast<std::size_t>(c)]; }
  const std::vector<Message>& queue(MessageClass c) const { return q_[static_cast<std::size_t>(c)]; }
  const Message& front(MessageClass c) const { return q_[static_cast<std::size_t>(c)].front(); }
  void pop(MessageClass c) {
    auto& q = q_[static_cast<std::size_t>(c)];
    q.erase(q.begin());
  }
  bool empty(MessageClass c) const { return q_[static_cast<std::size_t>(c)].empty(); }
  bool empty() const {
    for (const auto& q : q_)
      if (!q.empty()) return false;
    return true;
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& q : q_) n += q.size();
    return n;
  }

 private:
  std::array<std::vector<Message>, kNumMessageClasses> q_;  // short; vectors copy cheaply
};

// ---------------------------------------------------------------------------
// Private L2
// ---------------------------------------------------------------------------

enum class L2State : std::uint8_t { I, S, E, M, IS_D, IM_D, SM_D, MI_A, II_A };

std::string_view to_string(L2State s);

enum class L2Op : std::uint8_t { Read, Write, Flush, FlushAll };

/// A tile-local access. Read/Write touch `words` words starting at `addr`
/// within one line; Flush names a line; FlushAll ignores the address.
struct L2Request {
  std::uint64_t id = 0;
  L2Op op = L2Op::Read;
  Addr addr = 0;
  std::uint32_t words = 1;
  std::vector<Word> data;  // Write

  bool operator==(const L2Request&) const = default;
};

struct L2Completion {
  std::uint64_t id = 0;
  L2Op op = L2Op::Read;
  Addr addr = 0;
  std::vector<Word> data;  // Read

  bool operator==(const L2Completion&) const = default;
};

struct L2Stats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t upgrades = 0;
  std::uint64_t writebacks = 0;  // PutM with data
  std::uint64_t puts = 0;        // every PutM
  std::uint64_t forwards = 0;
  std::uint64_t invalidations = 0;
  std::uint64_t stalls = 0;
};

/// Directory-MESI private cache. Evictions of S lines are not silent: every
/// eviction sends PutM (carrying data only when dirty) and waits for PutAck,
/// so the directory sharer set tracks holders exactly.
class L2Controller {
 public:
  L2Controller(TileId self, const CacheParams& params, HomeMap home);

  TileId id() const { return self_; }

  /// Starts a tile-local access. False means retry later (MSHRs exhausted,
  /// the line is in a transient state, or no way can be freed).
  bool issue(const L2Request& req, Cycle now);

  bool can_accept(const Message& m) const;
  void receive(const Message& m, Cycle now);
  /// Per-cycle housekeeping (flush-all progress).
  void step(Cycle now);

  Outbox& outbox() { return out_; }
  const Outbox& outbox() const { return out_; }
  std::vector<L2Completion>& completions() { return done_; }

  bool idle() const { return mshrs_.empty() && wb_.empty() && out_.empty() && !flush_all_; }
  std::size_t outstanding() const { return mshrs_.size() + wb_.size(); }

  /// Stable state of a line, or the transient state if one is in progress.
  L2State state_of(Addr addr) const;
  /// Current data of a valid (S/E/M) line.
  std::optional<std::vector<Word>> data_of(Addr addr) const;
  /// Lines currently valid (S/E/M), for global invariant checks.
  std::vector<std::pair<Addr, L2State>> valid_lines() const;

  const L2Stats& stats() const { return stats_; }
  void set_transition_hook(TransitionHook h) { hook_ = std::move(h); }

  /// Canonical encoding of the protocol state (excludes statistics), used
  /// to deduplicate states in exhaustive exploration.
  void encode(std::vector<std::uint64_t>& out) const;

 private:
  struct Way {
    Addr line = 0;
    L2State state = L2State::I;
    std::uint64_t lru = 0;
  };
  struct Writeback {
    L2State state = L2State::MI_A;
    bool owner = false;  // was E or M when evicted
    bool dirty = false;
    std::vector<Word> data;
    std::vector<std::uint64_t> flush_ids;
  };

  Addr line_of(Addr a) const { return a & ~static_cast<Addr>(line_bytes_ - 1); }
  std::size_t set_of(Addr line) const {
    return static_cast<std::size_t>((line / static_cast<Addr>(line_bytes_)) % static_cast<Addr>(sets_));
  }
  std::span<Word> data(const Way& w) {
    return {words_.data() + static_cast<std::size_t>(&w - ways_v_.data()) * static_cast<std::size_t>(words_per_line_),
            static_cast<std::size_t>(words_per_line_)};
  }
  std::span<const Word> data(const Way& w) const {
    return {words_.data() + static_cast<std::size_t>(&w - ways_v_.data()) * static_cast<std::size_t>(words_per_line_),
            static_cast<std::size_t>(words_per_line_)};
  }
  std::vector<Word> copy_data(const Way& w) const {
    auto d = data(w);
    return {d.begin(), d.end()};
  }
  void set_data(const Way& w, const std::vector<Word>& src) {
    auto d = data(w);
    std::fill(d.begin(), d.end(), 0);
    std::copy_n(src.begin(), std::min(src.size(), d.size()), d.begin());
  }
  Way* find(Addr line);
  const Way* find(Addr line) const;
  Way* victim_for(Addr line);
  void evict(Way& w, std::optional<std::uint64_t> flush_id, Cycle now);
  void complete_access(Way& w, const L2Request& req);
  void progress_flush_all(Cycle now);
  void send(MsgType t, Addr line, Cycle now, bool dirty = false, std::vector<Word> data = {});
  void trace(Cycle now, Addr line, L2State from, const std::string& event, L2State to, std::size_t before);
  [[noreturn]] void protocol_error(const Message& m, L2State s) const;

  TileId self_;
  int line_bytes_;
  int words_per_line_;
  int sets_;
  int ways_;
  int max_mshrs_;
  std::shared_ptr<const HomeMap> home_;
  std::vector<Way> ways_v_;  // [set][way]
  std::vector<Word> words_;  // line data, [set][way][word]
  std::map<Addr, L2Request> mshrs_;  // in-set transients and their pending access
  std::map<Addr, Writeback> wb_;     // MI_A / II_A
  std::optional<std::uint64_t> flush_all_;
  Outbox out_;
  std::vector<L2Completion> done_;
  std::uint64_t lru_clock_ = 0;
  L2Stats stats_;
  TransitionHook hook_;
};

// ---------------------------------------------------------------------------
// LLC partition with directory
// ---------------------------------------------------------------------------

enum class LlcState : std::uint8_t { I, V, S, EM };

std::string_view to_string(LlcState s);

struct LlcStats {
  std::uint64_t requests = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t dram_reads = 0;
  std::uint64_t dram_writes = 0;
  std::uint64_t forwards_sent = 0;
  std::uint64_t invalidations_sent = 0;
  std::uint64_t dma_requests = 0;
  std::uint64_t dma_words = 0;
};

struct LlcLineView {
  LlcState state = LlcState::I;
  std::uint64_t sharers = 0;
  TileId owner = kNoTile;
  bool dirty = false;
  std::vector<Word> data;
};

/// Blocking home controller: one transaction at a time, head-of-line. It
/// collects InvAcks and owner data itself before answering the requester.
/// Handles GetS/GetM/PutM, LLC-served DMA (LLC-coherent and coherent modes)
/// and range flushes.
class LlcController {
 public:
  LlcController(TileId self, const CacheParams& params);

  TileId id() const { return self_; }

  bool can_accept(const Message& m) const;
  void receive(const Message& m, Cycle now);
  void dram_response(const DramResponse& r, Cycle now);
  void step(Cycle now) { advance(now); }

  Outbox& outbox() { return out_; }
  const Outbox& outbox() const { return out_; }
  std::vector<DramRequest>& dram_out() { return dram_out_; }

  bool busy() const { return txn_.has_value(); }
  bool idle() const { return !txn_ && out_.empty() && dram_out_.empty(); }

  LlcLineView line(Addr addr) const;
  const LlcStats& stats() const { return stats_; }
  void set_transition_hook(TransitionHook h) { hook_ = std::move(h); }

  void encode(std::vector<std::uint64_t>& out) const;

 private:
  struct Way {
    Addr line = 0;
    LlcState state = LlcState::I;
    std::uint64_t sharers = 0;
    TileId owner = kNoTile;
    bool dirty = false;
    std::uint64_t lru = 0;
  };
  enum class Phase : std::uint8_t { LineStart, EvictWait, FillWait, Apply, CohWait, FlushDrain };
  struct Txn {
    Message req;
    std::vector<Addr> lines;
    std::size_t cur = 0;
    Phase phase = Phase::LineStart;
    int waiting = 0;       // InvAcks plus owner Data still expected
    std::size_t slot = 0;  // way being evicted, filled or served
    std::vector<Word> gathered;
    int dram_acks = 0;
  };

  Addr line_of(Addr a) const { return a & ~static_cast<Addr>(line_bytes_ - 1); }
  std::size_t set_of(Addr line) const {
    return static_cast<std::size_t>((line / static_cast<Addr>(line_bytes_)) % static_cast<Addr>(sets_));
  }
  std::span<Word> data(const Way& w) {
    return {words_.data() + static_cast<std::size_t>(&w - ways_v_.data()) * static_cast<std::size_t>(words_per_line_),
            static_cast<std::size_t>(words_per_line_)};
  }
  std::span<const Word> data(const Way& w) const {
    return {words_.data() + static_cast<std::size_t>(&w - ways_v_.data()) * static_cast<std::size_t>(words_per_line_),
            static_cast<std::size_t>(words_per_line_)};
  }
  std::vector<Word> copy_data(const Way& w) const {
    auto d = data(w);
    return {d.begin(), d.end()};
  }
  void set_data(const Way& w, const std::vector<Word>& src) {
    auto d = data(w);
    std::fill(d.begin(), d.end(), 0);
    std::copy_n(src.begin(), std::min(src.size(), d.size()), d.begin());
  }
  std::optional<std::size_t> find(Addr line) const;
  std::size_t pick_victim(Addr line) const;
  void start(const Message& m, Cycle now);
  void advance(Cycle now);
  bool line_step(Cycle now);
  bool apply(Way& w, Cycle now);
  void finish_coh(Way& w, Cycle now);
  void finish_line(Cycle now);
  void finish_txn(Cycle now);
  void handle_putm(Cycle now);
  void recall_privates(Way& w, Cycle now, bool downgrade_only);
  void send(MsgType t, TileId dst, Addr addr, Cycle now);
  void send_data(TileId dst, Addr addr, Grant g, const std::vector<Word>& data, Cycle now);
  void trace(Cycle now, Addr line, LlcState from, const std::string& event, LlcState to, std::size_t before);
  bool dma_full_line(Addr line) const;
  [[noreturn]] void protocol_error(const Message& m) const;

  TileId self_;
  int line_bytes_;
  int words_per_line_;
  int sets_;
  int ways_;
  std::vector<Way> ways_v_;
  std::vector<Word> words_;
  std::optional<Txn> txn_;
  Outbox out_;
  std::vector<DramRequest> dram_out_;
  std::uint64_t lru_clock_ = 0;
  LlcStats stats_;
  TransitionHook hook_;
};

/// Single-writer/multiple-reader check over a set of private caches: per
/// line, at most one M/E holder, and none alongside an S holder. Returns a
/// description of the first violation.
std::optional<std::string> check_swmr(const std::vector<const L2Controller*>& caches);

}  // namespace espsim
