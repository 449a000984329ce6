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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "espsim/config.hpp"
#include "espsim/dram.hpp"
#include "espsim/noc.hpp"
#include "espsim/sockets.hpp"
#include "espsim/stats.hpp"
#include "espsim/trace.hpp"

namespace espsim {

enum class TraceLevel : std::uint8_t { Off, Summary, Timeline, Full };

std::optional<TraceLevel> trace_level_from_string(std::string_view s);

struct SimOptions {
  TraceLevel trace = TraceLevel::Summary;
  // Receives link events and protocol transitions at Full verbosity.
  TraceSink* full_sink = nullptr;
};

struct RunResult {
  enum class Status : std::uint8_t { Quiescent, MaxCycles, Deadlock };
  Status status = Status::Quiescent;
  Cycle cycles = 0;
  std::string dump;  // full state at a suspected deadlock
};

std::string_view to_string(RunResult::Status s);

/// Cycle-stepped SoC kernel. Each step runs, in order: (1) every router,
/// (2) socket proxies delivering arrived packets, (3) caches and LLCs,
/// (4) accelerators, (5) DRAM channels, (6) monitors, then commits the
/// messages produced this cycle to the network interfaces.
///
/// One instance is single-threaded and shares no state with others, so
/// independent instances may run on separate threads.
class Simulator {
 public:
  explicit Simulator(const ValidatedSoC& soc, SimOptions opts = {});
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  Cycle now() const { return now_; }
  void step();
  /// Runs until quiescence, `max_cycles`, or a deadlock suspicion (no
  /// progress for the configured window while work is outstanding).
  RunResult run_until_quiescent(Cycle max_cycles);
  bool quiescent() const;

  Stats stats() const;
  /// Timeline and driver events, ordered by cycle.
  std::vector<TraceRecord> timeline() const;
  const EventLog& log() const { return log_; }

  /// Current value of a word as a coherent observer would read it.
  Word peek(Addr a) const;

  const ValidatedSoC& soc() const { return soc_; }
  const MemoryMap& memory_map() const { return map_; }
  Noc& noc() { return noc_; }
  const Noc& noc() const { return noc_; }
  DramStore& store() { return store_; }

  ProcessorSocket* processor(Position p);
  AcceleratorSocket* accelerator(Position p);
  MemorySocket* memory(Position p);
  AuxSocket* aux();
  std::vector<ProcessorSocket*> processors() const { return procs_; }
  std::vector<AcceleratorSocket*> accelerators() const { return accs_; }
  std::vector<MemorySocket*> memories() const { return mems_; }

  std::string dump() const;

 private:
  std::uint64_t progress() const;

  ValidatedSoC soc_;
  SimOptions opts_;
  MemoryMap map_;
  Noc noc_;
  DramStore store_;
  BufferAllocator alloc_;
  EventLog log_;
  BarrierState barrier_;
  SocContext ctx_;
  std::vector<std::unique_ptr<TileSocket>> sockets_;  // row-major, empty tiles omitted
  std::vector<ProcessorSocket*> procs_;
  std::vector<AcceleratorSocket*> accs_;
  std::vector<MemorySocket*> mems_;
  AuxSocket* aux_ = nullptr;
  std::vector<MonitorSnapshot> snapshots_;
  Cycle now_ = 0;
  std::optional<RunResult::Status> last_status_;
};

}  // namespace espsim
