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

#include "espsim/simulator.hpp"

#include <algorithm>
#include <sstream>

namespace espsim {

std::optional<TraceLevel> trace_level_from_string(std::string_view s) {
  if (s == "off") return TraceLevel::Off;
  if (s == "summary") return TraceLevel::Summary;
  if (s == "timeline") return TraceLevel::Timeline;
  if (s == "full") return TraceLevel::Full;
  return std::nullopt;
}

std::string_view to_string(RunResult::Status s) {
  switch (s) {
    case RunResult::Status::Quiescent: return "quiescent";
    case RunResult::Status::MaxCycles: return "max_cycles";
    case RunResult::Status::Deadlock: return "deadlock";
  }
  return "?";
}

namespace {

std::string position_name(Position p) { return std::to_string(p.row) + "." + std::to_string(p.col); }

std::string hex(Addr a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

}  // namespace

Simulator::Simulator(const ValidatedSoC& soc, SimOptions opts)
    : soc_(soc),
      opts_(opts),
      map_(build_memory_map(soc_)),
      noc_(soc_),
      alloc_(map_, static_cast<std::uint64_t>(soc_.config().cache.line_size_bytes)) {
  ctx_.soc = &soc_;
  ctx_.map = &map_;
  ctx_.home.partitions = map_.partitions;
  ctx_.noc = &noc_;
  ctx_.store = &store_;
  ctx_.alloc = &alloc_;
  ctx_.log = &log_;
  ctx_.barrier = &barrier_;

  const auto& cfg = soc_.config();
  for (const auto& s : cfg.workload.scripts) {
    for (const auto& op : s.ops) {
      if (op.kind == OpKind::Barrier) {
        ++barrier_.participants;
        break;
      }
    }
  }
  for (TileId id = 0; id < static_cast<TileId>(soc_.num_tiles()); ++id) {
    const TileSpec& t = soc_.tile(id);
    switch (t.kind) {
      case TileKind::Processor: {
        ProcessorScript script;
        script.processor = t.position;
        for (const auto& s : cfg.workload.scripts)
          if (s.processor == t.position) script = s;
        auto p = std::make_unique<ProcessorSocket>(ctx_, id, std::move(script));
        procs_.push_back(p.get());
        sockets_.push_back(std::move(p));
        break;
      }
      case TileKind::Accelerator: {
        auto a = std::make_unique<AcceleratorSocket>(ctx_, id, cfg.accelerators.at(t.accelerator));
        accs_.push_back(a.get());
        sockets_.push_back(std::move(a));
        break;
      }
      case TileKind::Memory: {
        auto m = std::make_unique<MemorySocket>(ctx_, id);
        mems_.push_back(m.get());
        sockets_.push_back(std::move(m));
        break;
      }
      case TileKind::Auxiliary: {
        auto x = std::make_unique<AuxSocket>(ctx_, id);
        aux_ = x.get();
        sockets_.push_back(std::move(x));
        break;
      }
      case TileKind::Empty: break;
    }
  }

  if (opts_.trace == TraceLevel::Full && opts_.full_sink != nullptr) {
    TraceSink* sink = opts_.full_sink;
    noc_.set_link_observer([sink](const LinkEvent& e) {
      sink->record({e.cycle, "router@" + position_name(e.router), "FLIT",
                    "plane=" + std::to_string(e.plane) + " port=" + std::string(to_string(e.port)) +
                        " kind=" + std::string(to_string(e.kind)) + " src=" + position_name(e.src) +
                        " dst=" + position_name(e.dst) + " packet=" + std::to_string(e.packet)});
    });
    const auto hook = [sink](const Transition& t) {
      sink->record({t.cycle, std::string(t.kind) + "@" + std::to_string(t.controller), "TRANSITION",
                    "line=" + hex(t.line) + " " + std::string(t.from) + " " + t.event + " " + std::string(t.to)});
    };
    for (auto* p : procs_) p->l2().set_transition_hook(hook);
    for (auto* a : accs_) a->l2().set_transition_hook(hook);
    for (auto* m : mems_) m->llc().set_transition_hook(hook);
  }
}

void Simulator::step() {
  const Cycle now = now_;
  noc_.step(now);
  for (auto& s : sockets_) s->receive(now);
  for (auto& s : sockets_) s->step_caches(now);
  for (auto& s : sockets_) s->step_accelerator(now);
  for (auto& s : sockets_) s->step_dram(now);
  const Cycle interval = soc_.config().sim.monitor_interval;
  if (interval != 0 && now % interval == 0) {
    MonitorSnapshot snap;
    snap.cycle = now;
    for (PlaneId p = 1; p <= noc_.planes(); ++p) {
      snap.flits_injected += noc_.counters(p).flits_injected;
      snap.flits_ejected += noc_.counters(p).flits_ejected;
    }
    for (const auto* m : mems_) snap.dram_busy_cycles += m->dram().busy_cycles();
    snapshots_.push_back(snap);
  }
  for (auto& s : sockets_) s->commit(now);
  ++now_;
}

bool Simulator::quiescent() const {
  if (!noc_.idle() || noc_.pending_ejected() != 0) return false;
  return std::all_of(sockets_.begin(), sockets_.end(), [](const auto& s) { return s->script_done() && s->idle(); });
}

std::uint64_t Simulator::progress() const {
  std::uint64_t p = noc_.progress();
  for (const auto& s : sockets_) p += s->progress();
  return p;
}

RunResult Simulator::run_until_quiescent(Cycle max_cycles) {
  const Cycle window = soc_.config().sim.deadlock_window;
  std::uint64_t last_progress = progress();
  Cycle last_change = now_;
  RunResult r;
  while (true) {
    if (quiescent()) {
      r.status = RunResult::Status::Quiescent;
      break;
    }
    if (now_ >= max_cycles) {
      r.status = RunResult::Status::MaxCycles;
      break;
    }
    step();
    const std::uint64_t p = progress();
    const bool computing = std::any_of(accs_.begin(), accs_.end(), [](const auto* a) { return a->computing(); });
    if (p != last_progress || computing) {
      last_progress = p;
      last_change = now_;
    } else if (window != 0 && now_ - last_change >= window) {
      r.status = RunResult::Status::Deadlock;
      r.dump = dump();
      log_.add(now_, "engine", "DEADLOCK_SUSPECTED", "no progress for " + std::to_string(window) + " cycles");
      break;
    }
  }
  r.cycles = now_;
  last_status_ = r.status;
  return r;
}

std::string Simulator::dump() const {
  std::ostringstream os;
  os << "cycle " << now_ << ", flits in network " << noc_.flits_in_network() << ", reassembled waiting "
     << noc_.pending_ejected() << "\n";
  for (const auto& s : sockets_) {
    if (s->idle() && s->script_done()) continue;
    os << "  " << s->dump() << "\n";
  }
  return os.str();
}

Word Simulator::peek(Addr a) const {
  const auto line_bytes = static_cast<Addr>(soc_.config().cache.line_size_bytes);
  const std::size_t word = static_cast<std::size_t>((a % line_bytes) / kWordBytes);
  const auto dirty_private = [&](const L2Controller& l2) -> std::optional<Word> {
    if (l2.state_of(a) != L2State::M) return std::nullopt;
    return l2.data_of(a)->at(word);
  };
  for (const auto* p : procs_)
    if (auto v = dirty_private(p->l2())) return *v;
  for (const auto* x : accs_)
    if (auto v = dirty_private(x->l2())) return *v;
  if (const auto* part = map_.partition_for(a)) {
    for (const auto* m : mems_) {
      if (m->id() != part->tile) continue;
      const LlcLineView v = m->llc().line(a);
      if (v.state != LlcState::I) return v.data.at(word);
    }
  }
  return store_.read(a);
}

ProcessorSocket* Simulator::processor(Position p) {
  for (auto* x : procs_)
    if (x->position() == p) return x;
  return nullptr;
}

AcceleratorSocket* Simulator::accelerator(Position p) {
  for (auto* x : accs_)
    if (x->position() == p) return x;
  return nullptr;
}

MemorySocket* Simulator::memory(Position p) {
  for (auto* x : mems_)
    if (x->position() == p) return x;
  return nullptr;
}

AuxSocket* Simulator::aux() { return aux_; }

std::vector<TraceRecord> Simulator::timeline() const {
  std::vector<TraceRecord> out = log_.records();
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.cycle < y.cycle; });
  return out;
}

Stats Simulator::stats() const {
  Stats s;
  s.status = last_status_ ? std::string(to_string(*last_status_)) : (quiescent() ? "quiescent" : "running");
  s.cycles = now_;
  for (const auto* p : procs_)
    if (p->finished_at()) s.makespan = std::max(s.makespan, *p->finished_at());

  const Cycle cycles = std::max<Cycle>(now_, 1);
  for (PlaneId plane = 1; plane <= noc_.planes(); ++plane) {
    const auto& c = noc_.counters(plane);
    PlaneStats ps{plane, c.packets_injected, c.packets_ejected, c.flits_injected, c.flits_ejected, c.link_traversals,
                  0.0};
    for (int r = 0; r < soc_.rows(); ++r) {
      for (int col = 0; col < soc_.cols(); ++col) {
        for (int port = 0; port < kNumPorts; ++port) {
          const auto f = noc_.link_flits({r, col}, plane, static_cast<Port>(port));
          ps.max_link_utilization = std::max(ps.max_link_utilization, static_cast<double>(f) / static_cast<double>(cycles));
        }
      }
    }
    s.planes.push_back(ps);
  }
  for (const auto* m : mems_) {
    DramStats d;
    d.tile = m->entity();
    d.requests = m->dram().requests();
    d.words_read = m->dram().words_read();
    d.words_written = m->dram().words_written();
    d.busy_cycles = m->dram().busy_cycles();
    d.mean_queue_depth = m->dram().sampled_cycles() == 0
                             ? 0.0
                             : static_cast<double>(m->dram().depth_accum()) /
                                   static_cast<double>(m->dram().sampled_cycles());
    d.dma_words = m->dma_words_total();
    for (const auto& [tile, w] : m->dma_words()) {
      const Position p = soc_.position_of(tile);
      d.dma_words_by_requester[position_name(p)] = w.read + w.written;
      d.dma_words_read_by_requester[position_name(p)] = w.read;
      d.dma_words_written_by_requester[position_name(p)] = w.written;
    }
    d.llc_hits = m->llc().stats().hits;
    d.llc_misses = m->llc().stats().misses;
    s.memory.push_back(std::move(d));
  }
  for (const auto* x : accs_) {
    const Accelerator& a = x->accelerator();
    AcceleratorStats as;
    as.tile = x->entity();
    as.model = a.params().id;
    as.invocations = a.invocations();
    as.words_loaded = a.words_loaded();
    as.words_stored = a.words_stored();
    as.load_stall_cycles = a.load_stall_cycles();
    as.errors = a.errors();
    for (const auto& e : a.timeline()) ++as.events[std::string(to_string(e.event))];
    s.accelerators.push_back(std::move(as));
  }
  for (const auto* p : procs_) {
    for (const auto& [name, t] : p->invocation_times()) {
      s.invocations.push_back({p->entity(), name, t.first, t.second, t.second >= t.first ? t.second - t.first : 0});
    }
    for (Cycle lat : p->irq_latencies()) {
      std::uint64_t bound = 1;
      while (bound < lat) bound <<= 1;
      ++s.irq_latency_histogram[bound];
    }
    s.l2_hits += p->l2().stats().hits;
    s.l2_misses += p->l2().stats().misses;
  }
  for (const auto& sock : sockets_) s.local_shortcuts += sock->local_shortcuts();
  s.warnings = log_.warnings();
  s.snapshots = snapshots_;
  return s;
}

}  // namespace espsim
