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
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "espsim/accelerator.hpp"
#include "espsim/coherence.hpp"
#include "espsim/config.hpp"
#include "espsim/dram.hpp"
#include "espsim/noc.hpp"
#include "espsim/trace.hpp"

namespace espsim {

/// Processors waiting at a barrier; released when every scripted processor
/// has arrived.
struct BarrierState {
  int participants = 0;
  int arrived = 0;
  std::uint64_t generation = 0;
};

/// Shared run state the sockets reach through. Owned by the simulator.
struct SocContext {
  const ValidatedSoC* soc = nullptr;
  const MemoryMap* map = nullptr;
  HomeMap home;
  Noc* noc = nullptr;
  DramStore* store = nullptr;
  BufferAllocator* alloc = nullptr;
  EventLog* log = nullptr;
  BarrierState* barrier = nullptr;
};

/// Where a tile-side request goes.
struct Resolved {
  enum class Kind : std::uint8_t { Memory, Register, Unmapped };
  Kind kind = Kind::Unmapped;
  TileId tile = kNoTile;  // home memory tile or aperture owner
  Addr offset = 0;        // register offset inside the aperture
};

Resolved resolve_address(const MemoryMap& map, Addr a);

/// Master-side translation of a tile-local request into a packet: the
/// destination is the memory tile owning the address partition, or the
/// owner of the register aperture. Throws SimError("UnmappedAddress ...").
Packet master_proxy_translate(const ValidatedSoC& soc, const MemoryMap& map, const PlaneMap& planes, TileId src,
                              Message msg);

/// Common proxy plumbing of a tile: per-class outbound queues toward the
/// router's local port, a local shortcut for same-tile traffic, and
/// per-plane dispatch of reassembled packets with backpressure.
class TileSocket {
 public:
  TileSocket(SocContext& ctx, TileId id);
  virtual ~TileSocket() = default;
  TileSocket(const TileSocket&) = delete;
  TileSocket& operator=(const TileSocket&) = delete;

  TileId id() const { return id_; }
  Position position() const { return pos_; }
  const std::string& entity() const { return entity_; }

  // Phases of one engine cycle, called in this order for every tile.
  void receive(Cycle now);
  virtual void step_caches(Cycle) {}
  virtual void step_accelerator(Cycle) {}
  virtual void step_dram(Cycle) {}
  void commit(Cycle now);

  /// Nothing queued or in progress in this socket.
  virtual bool idle() const { return pending_empty() && local_.empty(); }
  /// Script (if any) has run to completion.
  virtual bool script_done() const { return true; }
  /// Monotone count of useful work, for deadlock detection.
  std::uint64_t progress() const { return progress_; }
  std::uint64_t local_shortcuts() const { return shortcuts_; }

  /// Human-readable state for deadlock dumps.
  virtual std::string dump() const;

 protected:
  /// Queues a message; same-tile destinations use the local shortcut.
  void send(Message m);
  void drain(Outbox& box);
  /// Dispatches one arriving message. Returns false to leave it in the
  /// network (the device cannot take it this cycle).
  virtual bool handle(const Message& m, Cycle now) = 0;
  /// Called when a queued message has entered the network interface.
  virtual void on_injected(const Message&, Cycle) {}
  bool pending_empty() const;
  void bump() { ++progress_; }
  void note_shortcut() { ++shortcuts_; }

  SocContext& ctx_;
  TileId id_;
  Position pos_;
  std::string entity_;

 private:
  std::array<std::deque<Message>, kNumMessageClasses> pending_;
  std::deque<Message> local_;
  std::uint64_t progress_ = 0;
  std::uint64_t shortcuts_ = 0;
};

/// Memory tile: one LLC partition with its directory slice, and the DRAM
/// channel behind it. Non-coherent DMA bypasses the LLC and goes straight
/// to the channel.
class MemorySocket : public TileSocket {
 public:
  MemorySocket(SocContext& ctx, TileId id);

  void step_caches(Cycle now) override;
  void step_dram(Cycle now) override;
  bool idle() const override;
  std::string dump() const override;

  LlcController& llc() { return llc_; }
  const LlcController& llc() const { return llc_; }
  const DramChannel& dram() const { return dram_; }
  struct DmaWords {
    std::uint64_t read = 0;
    std::uint64_t written = 0;
  };
  /// DMA words served here, by requesting tile.
  const std::map<TileId, DmaWords>& dma_words() const { return dma_words_; }
  std::uint64_t dma_words_total() const;

 protected:
  bool handle(const Message& m, Cycle now) override;

 private:
  struct Bypass {
    TileId requester;
    std::uint64_t tag;
    std::uint32_t len;
  };
  LlcController llc_;
  DramChannel dram_;
  std::map<std::uint64_t, Bypass> bypass_;
  std::uint64_t next_tag_ = 1;
  std::map<TileId, DmaWords> dma_words_;
};

/// Auxiliary tile: receives acc_done on the IO/IRQ plane and forwards an
/// interrupt to the processor registered as the invocation's owner.
class AuxSocket : public TileSocket {
 public:
  AuxSocket(SocContext& ctx, TileId id) : TileSocket(ctx, id) {}

  void step_caches(Cycle now) override;
  bool idle() const override { return TileSocket::idle() && pending_.empty(); }
  std::uint64_t irqs_forwarded() const { return forwarded_; }
  std::uint64_t spurious() const { return spurious_; }

 protected:
  bool handle(const Message& m, Cycle now) override;

 private:
  // Pending bits: accelerator tile -> (owner, emission cycle).
  std::map<TileId, std::pair<TileId, std::uint64_t>> pending_;
  std::uint64_t forwarded_ = 0;
  std::uint64_t spurious_ = 0;
};

/// Accelerator tile: the accelerator, its DMA engine and a private L2 used
/// when an invocation runs fully coherent.
class AcceleratorSocket : public TileSocket {
 public:
  AcceleratorSocket(SocContext& ctx, TileId id, const AcceleratorParams& params);

  void step_caches(Cycle now) override;
  void step_accelerator(Cycle now) override;
  bool idle() const override;
  std::string dump() const override;

  Accelerator& accelerator() { return acc_; }
  const Accelerator& accelerator() const { return acc_; }
  L2Controller& l2() { return l2_; }
  const L2Controller& l2() const { return l2_; }
  bool computing() const { return acc_.computing(); }

 protected:
  bool handle(const Message& m, Cycle now) override;
  void on_injected(const Message& m, Cycle now) override;

 private:
  struct FcBurst {
    std::uint64_t tag;
    bool write;
    std::uint32_t remaining;
    std::vector<Word> data;
  };
  struct FcChunk {
    L2Request req;
    std::size_t burst;
    std::size_t offset;
  };
  void start_request(AccRequest r, Cycle now);
  void send_acc_done(TileId owner, Cycle emitted);
  void sync_timeline();

  Accelerator acc_;
  L2Controller l2_;
  std::map<std::uint64_t, FcBurst> fc_bursts_;   // by burst tag
  std::deque<FcChunk> fc_queue_;
  std::map<std::uint64_t, FcChunk> fc_inflight_;  // by L2 request id
  std::uint64_t next_l2_id_ = 1;
  std::size_t timeline_synced_ = 0;
  // A fully coherent run flushes the private cache before acc_done leaves.
  std::optional<std::pair<TileId, Cycle>> held_irq_;
  std::optional<std::uint64_t> flush_id_;
};

/// Processor tile: private L2 plus a scripted sequencer that implements the
/// driver semantics (esp_alloc, esp_run with its flush protocol, interrupt
/// waits). One outstanding memory operation at a time.
class ProcessorSocket : public TileSocket {
 public:
  ProcessorSocket(SocContext& ctx, TileId id, ProcessorScript script);

  void step_caches(Cycle now) override;
  bool idle() const override;
  bool script_done() const override { return pc_ >= script_.ops.size() && !run_; }
  std::string dump() const override;

  L2Controller& l2() { return l2_; }
  const L2Controller& l2() const { return l2_; }
  std::optional<Addr> buffer(const std::string& name) const;
  std::uint64_t buffer_bytes(const std::string& name) const;
  /// Values returned by Load and ReadReg ops, in program order.
  const std::vector<std::pair<Addr, Word>>& loads() const { return loads_; }
  /// Per-invocation (register-sequence start, IRQ receipt) cycles.
  const std::map<std::string, std::pair<Cycle, Cycle>>& invocation_times() const { return inv_times_; }
  std::optional<Cycle> finished_at() const { return finished_; }
  const std::vector<Cycle>& irq_latencies() const { return irq_latencies_; }

 protected:
  bool handle(const Message& m, Cycle now) override;

 private:
  enum class Wait : std::uint8_t { None, L2, RegRead, Irq, LlcFlush, Barrier };
  struct MicroOp {
    enum class Kind : std::uint8_t { FlushL2, LlcFlush, WriteReg, Invoke };
    Kind kind;
    TileId tile = kNoTile;
    Addr addr = 0;
    Word value = 0;
    std::string inv;
  };
  enum class InvState : std::uint8_t { Waiting, Started, Done };
  struct RunState {
    std::vector<InvocationSpec> invs;
    std::vector<InvState> state;
    std::deque<MicroOp> micro;
    bool flush_protocol = true;
  };

  void exec_op(const ScriptOp& op, Cycle now);
  void exec_micro(Cycle now);
  void schedule_ready(Cycle now);
  void append_invocation(std::size_t i);
  void complete_irq(TileId accel, Cycle now);
  std::optional<Addr> addr_of(const AddrRef& r) const;
  void finish_op(Cycle now, const std::string& what, std::string detail = {});
  void init_buffer(Addr base, std::uint64_t bytes, BufferInit init, Word value, const std::string& name);

  L2Controller l2_;
  ProcessorScript script_;
  std::size_t pc_ = 0;
  Wait wait_ = Wait::None;
  std::uint64_t wait_barrier_gen_ = 0;
  TileId wait_irq_tile_ = kNoTile;
  int llc_flush_acks_ = 0;
  std::uint64_t next_l2_id_ = 1;
  std::optional<RunState> run_;
  std::map<std::string, std::pair<Addr, std::uint64_t>> buffers_;
  std::multiset<TileId> pending_irqs_;
  std::vector<std::pair<Addr, Word>> loads_;
  std::map<std::string, std::pair<Cycle, Cycle>> inv_times_;
  std::vector<Cycle> irq_latencies_;
  std::optional<Cycle> finished_;
  bool waiting_l2_completion_ = false;
  Addr pending_load_addr_ = 0;
};

}  // namespace espsim
