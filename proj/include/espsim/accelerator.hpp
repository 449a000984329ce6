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
#include <optional>
#include <string>
#include <vector>

#include "espsim/common.hpp"
#include "espsim/config.hpp"

namespace espsim {

// Register map of an accelerator aperture (byte offsets).
inline constexpr Addr kRegCmd = 0x00;        // write 1: start
inline constexpr Addr kRegStatus = 0x08;     // read: AccPhase
inline constexpr Addr kRegSrc = 0x10;
inline constexpr Addr kRegDst = 0x18;
inline constexpr Addr kRegMode = 0x20;       // CoherenceMode
inline constexpr Addr kRegP2PSrc = 0x28;     // producer tile + 1, 0 = load from memory
inline constexpr Addr kRegP2PDst = 0x30;     // consumer tile + 1, 0 = store to memory
inline constexpr Addr kRegIrqOwner = 0x38;   // processor tile that waits for acc_done
inline constexpr Addr kRegCount = 8;

enum class AccPhase : std::uint8_t { Idle, Config, Running, Done };
std::string_view to_string(AccPhase p);

enum class AccEvent : std::uint8_t {
  Cfg,
  LoadIssue,
  LoadDone,
  ComputeStart,
  ComputeDone,
  StoreIssue,
  StoreDone,
  Irq,
  Error,
};
std::string_view to_string(AccEvent e);

struct TimelineEvent {
  Cycle cycle = 0;
  std::string entity;
  AccEvent event = AccEvent::Cfg;
  std::string detail;

  bool operator==(const TimelineEvent&) const = default;
};

/// One data movement the accelerator asks its socket to perform.
struct AccRequest {
  enum class Kind : std::uint8_t {
    Read,        // DMA read of `words` at `addr`
    Write,       // DMA write of `data` at `addr`
    P2PCredit,   // consumer tells `peer` it has a free input half
    P2PSend,     // producer pushes one store burst to `peer`
  };
  Kind kind = Kind::Read;
  Addr addr = 0;
  std::uint32_t words = 0;
  std::vector<Word> data;
  TileId peer = kNoTile;
  CoherenceMode mode = CoherenceMode::NonCoherentDMA;
  std::uint64_t tag = 0;  // burst index
};

enum class HalfState : std::uint8_t { Free, Loading, Full, Computing, Storing };

/// Behavioral model of a loosely-coupled accelerator. Three serial engines
/// (load, compute, store) share ping-pong input and output halves of the
/// PLM: burst k uses half k % 2 on both sides. Handoffs between engines take
/// no extra cycle, so an isolated burst costs exactly l + c + s.
class Accelerator {
 public:
  Accelerator(TileId tile, std::string name, AcceleratorParams params);

  TileId tile() const { return tile_; }
  const std::string& name() const { return name_; }
  const AcceleratorParams& params() const { return params_; }

  void write_register(Addr offset, Word value, Cycle now);
  /// Returns nullopt for an offset outside the register map.
  std::optional<Word> read_register(Addr offset) const;

  // Completions delivered by the socket.
  void load_data(std::uint64_t tag, const std::vector<Word>& data, Cycle now);
  void store_ack(std::uint64_t tag, Cycle now);
  void p2p_credit(TileId from, std::uint32_t words, Cycle now);

  void step(Cycle now);

  /// Requests for the socket, oldest first; the socket pops what it takes.
  std::vector<AccRequest>& requests() { return out_; }
  /// acc_done, as (irq owner), once per invocation.
  std::optional<TileId> take_irq();

  AccPhase phase() const { return phase_; }
  bool computing() const { return compute_done_.has_value(); }
  CoherenceMode mode() const { return mode_; }
  bool idle() const { return phase_ != AccPhase::Running && out_.empty() && !irq_; }
  HalfState input_half(int i) const { return in_[static_cast<std::size_t>(i)]; }
  HalfState output_half(int i) const { return outh_[static_cast<std::size_t>(i)]; }

  const std::vector<TimelineEvent>& timeline() const { return timeline_; }
  std::uint64_t words_loaded() const { return words_loaded_; }
  std::uint64_t words_stored() const { return words_stored_; }
  std::uint64_t load_stall_cycles() const { return load_stalls_; }
  std::uint64_t invocations() const { return invocations_; }
  std::uint64_t errors() const { return errors_; }

 private:
  void event(Cycle now, AccEvent e, std::string detail = {});
  void start(Cycle now);
  Addr burst_addr(Addr base, int burst, int words) const;

  TileId tile_;
  std::string name_;
  AcceleratorParams params_;
  std::array<Word, kRegCount> regs_{};
  std::array<bool, kRegCount> written_{};
  AccPhase phase_ = AccPhase::Idle;
  CoherenceMode mode_ = CoherenceMode::NonCoherentDMA;
  Cycle started_ = 0;

  std::array<HalfState, 2> in_{};
  std::array<HalfState, 2> outh_{};
  std::array<std::vector<Word>, 2> in_data_;
  std::array<std::vector<Word>, 2> out_data_;
  int next_load_ = 0;
  int next_compute_ = 0;
  int next_store_ = 0;
  int stored_ = 0;
  bool load_busy_ = false;
  bool store_busy_ = false;
  std::optional<Cycle> compute_done_;
  int credits_ = 0;  // P2P producer: consumer halves known to be free

  std::vector<AccRequest> out_;
  std::optional<TileId> irq_;
  std::vector<TimelineEvent> timeline_;
  std::uint64_t words_loaded_ = 0;
  std::uint64_t words_stored_ = 0;
  std::uint64_t load_stalls_ = 0;
  std::uint64_t invocations_ = 0;
  std::uint64_t errors_ = 0;
};

}  // namespace espsim
