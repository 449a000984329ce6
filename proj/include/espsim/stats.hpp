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

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "espsim/common.hpp"

namespace espsim {

inline constexpr int kStatsVersion = 1;

struct PlaneStats {
  PlaneId plane = 0;
  std::uint64_t packets_injected = 0;
  std::uint64_t packets_ejected = 0;
  std::uint64_t flits_injected = 0;
  std::uint64_t flits_ejected = 0;
  std::uint64_t link_traversals = 0;
  double max_link_utilization = 0.0;

  bool operator==(const PlaneStats&) const = default;
};

struct DramStats {
  std::string tile;
  std::uint64_t requests = 0;
  std::uint64_t words_read = 0;
  std::uint64_t words_written = 0;
  std::uint64_t busy_cycles = 0;
  double mean_queue_depth = 0.0;
  std::uint64_t dma_words = 0;
  std::map<std::string, std::uint64_t> dma_words_by_requester;
  std::map<std::string, std::uint64_t> dma_words_read_by_requester;
  std::map<std::string, std::uint64_t> dma_words_written_by_requester;
  std::uint64_t llc_hits = 0;
  std::uint64_t llc_misses = 0;

  bool operator==(const DramStats&) const = default;
};

struct AcceleratorStats {
  std::string tile;
  std::string model;
  std::uint64_t invocations = 0;
  std::uint64_t words_loaded = 0;
  std::uint64_t words_stored = 0;
  std::uint64_t load_stall_cycles = 0;
  std::uint64_t errors = 0;
  std::map<std::string, std::uint64_t> events;  // timeline event counts

  bool operator==(const AcceleratorStats&) const = default;
};

struct InvocationStats {
  std::string processor;
  std::string name;
  Cycle start = 0;  // driver begins the register sequence
  Cycle irq = 0;    // interrupt received
  Cycle makespan = 0;

  bool operator==(const InvocationStats&) const = default;
};

struct MonitorSnapshot {
  Cycle cycle = 0;
  std::uint64_t flits_injected = 0;
  std::uint64_t flits_ejected = 0;
  std::uint64_t dram_busy_cycles = 0;

  bool operator==(const MonitorSnapshot&) const = default;
};

struct Stats {
  int version = kStatsVersion;
  std::string status;  // quiescent, max_cycles, deadlock
  Cycle cycles = 0;
  Cycle makespan = 0;  // last script completion
  std::vector<PlaneStats> planes;
  std::vector<DramStats> memory;
  std::vector<AcceleratorStats> accelerators;
  std::vector<InvocationStats> invocations;
  // Power-of-two buckets: count of IRQ latencies <= bound.
  std::map<std::uint64_t, std::uint64_t> irq_latency_histogram;
  std::uint64_t l2_hits = 0;
  std::uint64_t l2_misses = 0;
  std::uint64_t local_shortcuts = 0;
  std::uint64_t warnings = 0;
  std::vector<MonitorSnapshot> snapshots;

  bool operator==(const Stats&) const = default;
};

/// Raised when reading a stats document of an unsupported version.
class StatsVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json stats_to_json(const Stats& s);
Stats stats_from_json(const nlohmann::json& j);

}  // namespace espsim
