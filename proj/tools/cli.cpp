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

#include "cli.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace espsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Loaded {
  int code = kExitOk;
  json doc;
  std::string error;
};

Loaded load_document(const fs::path& path) {
  Loaded l;
  std::ifstream in(path);
  if (!in) {
    l.code = kExitIo;
    l.error = "cannot read " + path.string();
    return l;
  }
  try {
    l.doc = json::parse(in);
  } catch (const json::parse_error& e) {
    l.code = kExitIo;
    l.error = path.string() + ": " + e.what();
  }
  return l;
}

struct Elaborated {
  int code = kExitOk;
  std::optional<ValidatedSoC> soc;
  std::vector<std::string> errors;
};

Elaborated elaborate(const json& doc) {
  Elaborated e;
  SocConfig cfg;
  try {
    cfg = parse_config(doc);
  } catch (const ConfigError& ex) {
    e.code = kExitInvalid;
    e.errors.emplace_back(ex.what());
    return e;
  }
  ValidationResult v = validate_config(cfg);
  if (!v.ok()) {
    e.code = kExitInvalid;
    for (const auto& x : v.violations) e.errors.push_back(std::string(to_string(x.code)) + ": " + x.message);
    return e;
  }
  e.soc = std::move(v.soc);
  return e;
}

std::string timeline_csv(const Simulator& sim) {
  std::ostringstream os;
  os << "cycle,entity,event,detail\n";
  for (const auto& r : sim.timeline()) os << to_csv_line(r) << "\n";
  return os.str();
}

int exit_for(RunResult::Status s) {
  switch (s) {
    case RunResult::Status::Quiescent: return kExitOk;
    case RunResult::Status::MaxCycles: return kExitMaxCycles;
    case RunResult::Status::Deadlock: return kExitDeadlock;
  }
  return kExitInvalid;
}

struct PointResult {
  int code = kExitOk;
  std::string status;
  Cycle makespan = 0;
  std::string message;
};

// Runs one elaborated configuration and writes its artifacts into `dir`.
PointResult run_into(const ValidatedSoC& soc, const fs::path& dir, TraceLevel trace, Cycle max_cycles) {
  PointResult p;
  fs::create_directories(dir);

  std::optional<std::ofstream> trace_file;
  std::optional<StreamTraceSink> sink;
  const fs::path trace_path = dir / "trace.log";
  const fs::path trace_tmp = dir / "trace.log.tmp";
  SimOptions opts;
  opts.trace = trace;
  if (trace == TraceLevel::Full) {
    trace_file.emplace(trace_tmp, std::ios::binary | std::ios::trunc);
    if (!*trace_file) throw std::runtime_error("cannot write " + trace_tmp.string());
    sink.emplace(*trace_file);
    opts.full_sink = &*sink;
  }

  Simulator sim(soc, opts);
  const RunResult r = sim.run_until_quiescent(max_cycles);
  const Stats s = sim.stats();
  p.code = exit_for(r.status);
  p.status = std::string(to_string(r.status));
  p.makespan = s.makespan;
  if (r.status == RunResult::Status::Deadlock) p.message = r.dump;

  write_atomic(dir / "stats.json", stats_to_json(s).dump(2) + "\n");
  if (trace == TraceLevel::Timeline || trace == TraceLevel::Full) write_atomic(dir / "timeline.csv", timeline_csv(sim));
  if (trace_file) {
    trace_file->close();
    fs::rename(trace_tmp, trace_path);
  }
  return p;
}

std::vector<std::vector<std::size_t>> cartesian(const std::vector<SweepAxis>& axes) {
  std::vector<std::vector<std::size_t>> out{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : out) {
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        auto p = prefix;
        p.push_back(i);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string point_dir_name(std::size_t i) {
  std::string n = std::to_string(i);
  return "point-" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("axis must look like key=v1,v2: " + text);
  SweepAxis a;
  a.key = text.substr(0, eq);
  const std::string rest = text.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string v = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!v.empty()) {
      json parsed = json::parse(v, nullptr, false);
      a.values.push_back(parsed.is_discarded() ? json(v) : parsed);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (a.values.empty()) throw std::invalid_argument("axis " + a.key + " has no values");
  return a;
}

void apply_override(json& doc, const std::string& key, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string seg = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) throw std::invalid_argument("empty segment in key " + key);
    json* child = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(seg, &used);
        if (used != seg.size()) throw std::invalid_argument(seg);
      } catch (const std::exception&) {
        throw std::invalid_argument("key " + key + ": '" + seg + "' is not an array index");
      }
      if (idx >= node->size()) throw std::invalid_argument("key " + key + ": index " + seg + " out of range");
      child = &(*node)[idx];
    } else if (node->is_object() || node->is_null()) {
      child = &(*node)[seg];
    } else {
      throw std::invalid_argument("key " + key + ": cannot descend into '" + seg + "'");
    }
    if (dot == std::string::npos) {
      *child = value;
      return;
    }
    node = child;
    start = dot + 1;
  }
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

int cmd_validate(const fs::path& config, std::ostream& out, std::ostream& err) {
  const Loaded l = load_document(config);
  if (l.code != kExitOk) {
    err << "error: " << l.error << "\n";
    return l.code;
  }
  const Elaborated e = elaborate(l.doc);
  for (const auto& m : e.errors) err << "invalid: " << m << "\n";
  if (e.code == kExitOk) out << config.string() << ": ok\n";
  return e.code;
}

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  Loaded l = load_document(m.config);
  if (l.code != kExitOk) {
    err << "error: " << l.error << "\n";
    return l.code;
  }
  if (m.seed) l.doc["seed"] = *m.seed;
  const Elaborated e = elaborate(l.doc);
  if (e.code != kExitOk) {
    for (const auto& x : e.errors) err << "invalid: " << x << "\n";
    return e.code;
  }
  PointResult p;
  try {
    p = run_into(*e.soc, m.out_dir, m.trace, m.max_cycles);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  out << p.status << " makespan " << p.makespan << " -> " << (m.out_dir / "stats.json").string() << "\n";
  if (p.code == kExitDeadlock) err << "deadlock suspected\n" << p.message;
  if (p.code == kExitMaxCycles) err << "stopped at max cycles " << m.max_cycles << "\n";
  return p.code;
}

int cmd_sweep(const RunManifest& m, std::ostream& out, std::ostream& err) {
  if (m.axes.empty()) {
    err << "usage: sweep needs at least one --axis key=v1,v2,...\n";
    return kExitIo;
  }
  for (const auto& a : m.axes) {
    if (a.values.empty()) {
      err << "usage: axis " << a.key << " has no values\n";
      return kExitIo;
    }
  }
  Loaded base = load_document(m.config);
  if (base.code != kExitOk) {
    err << "error: " << base.error << "\n";
    return base.code;
  }
  if (m.seed) base.doc["seed"] = *m.seed;

  const auto points = cartesian(m.axes);
  std::vector<json> docs(points.size(), base.doc);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t a = 0; a < m.axes.size(); ++a) {
      try {
        apply_override(docs[i], m.axes[a].key, m.axes[a].values[points[i][a]]);
      } catch (const std::invalid_argument& ex) {
        err << "invalid: " << ex.what() << "\n";
        return kExitInvalid;
      }
    }
    // An axis naming a key the schema does not know fails before anything runs.
    try {
      (void)parse_config(docs[i]);
    } catch (const ConfigError& ex) {
      err << "invalid: " << ex.what() << "\n";
      return kExitInvalid;
    }
  }

  std::vector<PointResult> results(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      PointResult& r = results[i];
      const Elaborated e = elaborate(docs[i]);
      if (e.code != kExitOk) {
        r.code = e.code;
        r.status = "invalid";
        for (const auto& x : e.errors) r.message += x + "\n";
        continue;
      }
      try {
        r = run_into(*e.soc, m.out_dir / point_dir_name(i), m.trace, m.max_cycles);
      } catch (const std::exception& ex) {
        r.code = kExitIo;
        r.status = "error";
        r.message = ex.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(m.jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  json index_points = json::array();
  int code = kExitOk;
  for (std::size_t i = 0; i < points.size(); ++i) {
    json params = json::object();
    for (std::size_t a = 0; a < m.axes.size(); ++a) params[m.axes[a].key] = m.axes[a].values[points[i][a]];
    const PointResult& r = results[i];
    json entry = {{"index", i}, {"params", params}, {"status", r.status}, {"exit", r.code}};
    if (r.status != "invalid" && r.status != "error") {
      entry["stats"] = point_dir_name(i) + "/stats.json";
      entry["makespan"] = r.makespan;
    }
    index_points.push_back(entry);
    out << point_dir_name(i) << " " << params.dump() << " " << r.status;
    if (!entry.contains("stats")) {
      out << "\n";
    } else {
      out << " makespan " << r.makespan << "\n";
    }
    if (r.code != kExitOk) {
      err << point_dir_name(i) << " failed (" << r.status << ")";
      if (r.status != "deadlock" && !r.message.empty()) err << ": " << r.message;
      err << "\n";
      code = std::max(code, r.code);
    }
  }
  json axes = json::array();
  for (const auto& a : m.axes) axes.push_back({{"key", a.key}, {"values", a.values}});
  const json index = {{"version", kStatsVersion}, {"config", m.config.filename().string()}, {"axes", axes},
                      {"points", index_points}};
  try {
    write_atomic(m.out_dir / "index.json", index.dump(2) + "\n");
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  return code;
}

}  // namespace espsim::cli
