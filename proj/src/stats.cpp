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

#include "espsim/stats.hpp"

namespace espsim {

using nlohmann::json;

json stats_to_json(const Stats& s) {
  json planes = json::array();
  for (const auto& p : s.planes) {
    planes.push_back({{"plane", p.plane},
                      {"packets_injected", p.packets_injected},
                      {"packets_ejected", p.packets_ejected},
                      {"flits_injected", p.flits_injected},
                      {"flits_ejected", p.flits_ejected},
                      {"link_traversals", p.link_traversals},
                      {"max_link_utilization", p.max_link_utilization}});
  }
  json memory = json::array();
  for (const auto& m : s.memory) {
    memory.push_back({{"tile", m.tile},
                      {"requests", m.requests},
                      {"words_read", m.words_read},
                      {"words_written", m.words_written},
                      {"busy_cycles", m.busy_cycles},
                      {"mean_queue_depth", m.mean_queue_depth},
                      {"dma_words", m.dma_words},
                      {"dma_words_by_requester", m.dma_words_by_requester},
                      {"dma_words_read_by_requester", m.dma_words_read_by_requester},
                      {"dma_words_written_by_requester", m.dma_words_written_by_requester},
                      {"llc_hits", m.llc_hits},
                      {"llc_misses", m.llc_misses}});
  }
  json accels = json::array();
  for (const auto& a : s.accelerators) {
    accels.push_back({{"tile", a.tile},
                      {"model", a.model},
                      {"invocations", a.invocations},
                      {"words_loaded", a.words_loaded},
                      {"words_stored", a.words_stored},
                      {"load_stall_cycles", a.load_stall_cycles},
                      {"errors", a.errors},
                      {"events", a.events}});
  }
  json invs = json::array();
  for (const auto& i : s.invocations) {
    invs.push_back({{"processor", i.processor},
                    {"name", i.name},
                    {"start", i.start},
                    {"irq", i.irq},
                    {"makespan", i.makespan}});
  }
  json hist = json::array();
  for (const auto& [bound, n] : s.irq_latency_histogram) hist.push_back({{"le", bound}, {"count", n}});
  json snaps = json::array();
  for (const auto& m : s.snapshots) {
    snaps.push_back({{"cycle", m.cycle},
                     {"flits_injected", m.flits_injected},
                     {"flits_ejected", m.flits_ejected},
                     {"dram_busy_cycles", m.dram_busy_cycles}});
  }
  return {{"version", s.version},
          {"status", s.status},
          {"cycles", s.cycles},
          {"makespan", s.makespan},
          {"planes", planes},
          {"memory", memory},
          {"accelerators", accels},
          {"invocations", invs},
          {"irq_latency_histogram", hist},
          {"l2_hits", s.l2_hits},
          {"l2_misses", s.l2_misses},
          {"local_shortcuts", s.local_shortcuts},
          {"warnings", s.warnings},
          {"snapshots", snaps}};
}

Stats stats_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer()) {
    throw StatsVersionError("stats document has no version");
  }
  if (j["version"].get<int>() != kStatsVersion) {
    throw StatsVersionError("unsupported stats version " + j["version"].dump() + " (expected " +
                            std::to_string(kStatsVersion) + ")");
  }
  Stats s;
  s.status = j.at("status").get<std::string>();
  s.cycles = j.at("cycles").get<Cycle>();
  s.makespan = j.at("makespan").get<Cycle>();
  for (const auto& p : j.at("planes")) {
    s.planes.push_back({p.at("plane").get<PlaneId>(), p.at("packets_injected").get<std::uint64_t>(),
                        p.at("packets_ejected").get<std::uint64_t>(), p.at("flits_injected").get<std::uint64_t>(),
                        p.at("flits_ejected").get<std::uint64_t>(), p.at("link_traversals").get<std::uint64_t>(),
                        p.at("max_link_utilization").get<double>()});
  }
  for (const auto& m : j.at("memory")) {
    DramStats d;
    d.tile = m.at("tile").get<std::string>();
    d.requests = m.at("requests").get<std::uint64_t>();
    d.words_read = m.at("words_read").get<std::uint64_t>();
    d.words_written = m.at("words_written").get<std::uint64_t>();
    d.busy_cycles = m.at("busy_cycles").get<std::uint64_t>();
    d.mean_queue_depth = m.at("mean_queue_depth").get<double>();
    d.dma_words = m.at("dma_words").get<std::uint64_t>();
    using Counts = std::map<std::string, std::uint64_t>;
    d.dma_words_by_requester = m.at("dma_words_by_requester").get<Counts>();
    d.dma_words_read_by_requester = m.at("dma_words_read_by_requester").get<Counts>();
    d.dma_words_written_by_requester = m.at("dma_words_written_by_requester").get<Counts>();
    d.llc_hits = m.at("llc_hits").get<std::uint64_t>();
    d.llc_misses = m.at("llc_misses").get<std::uint64_t>();
    s.memory.push_back(std::move(d));
  }
  for (const auto& a : j.at("accelerators")) {
    AcceleratorStats x;
    x.tile = a.at("tile").get<std::string>();
    x.model = a.at("model").get<std::string>();
    x.invocations = a.at("invocations").get<std::uint64_t>();
    x.words_loaded = a.at("words_loaded").get<std::uint64_t>();
    x.words_stored = a.at("words_stored").get<std::uint64_t>();
    x.load_stall_cycles = a.at("load_stall_cycles").get<std::uint64_t>();
    x.errors = a.at("errors").get<std::uint64_t>();
    x.events = a.at("events").get<std::map<std::string, std::uint64_t>>();
    s.accelerators.push_back(std::move(x));
  }
  for (const auto& i : j.at("invocations")) {
    s.invocations.push_back({i.at("processor").get<std::string>(), i.at("name").get<std::string>(),
                             i.at("start").get<Cycle>(), i.at("irq").get<Cycle>(), i.at("makespan").get<Cycle>()});
  }
  for (const auto& h : j.at("irq_latency_histogram")) {
    s.irq_latency_histogram[h.at("le").get<std::uint64_t>()] = h.at("count").get<std::uint64_t>();
  }
  s.l2_hits = j.at("l2_hits").get<std::uint64_t>();
  s.l2_misses = j.at("l2_misses").get<std::uint64_t>();
  s.local_shortcuts = j.at("local_shortcuts").get<std::uint64_t>();
  s.warnings = j.at("warnings").get<std::uint64_t>();
  for (const auto& m : j.at("snapshots")) {
    s.snapshots.push_back({m.at("cycle").get<Cycle>(), m.at("flits_injected").get<std::uint64_t>(),
                           m.at("flits_ejected").get<std::uint64_t>(), m.at("dram_busy_cycles").get<std::uint64_t>()});
  }
  return s;
}

}  // namespace espsim
