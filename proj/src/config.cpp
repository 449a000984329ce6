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

#include "espsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace espsim {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON readers
// ---------------------------------------------------------------------------

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

// Accepts plain integers, hex strings, and sizes such as "512MiB".
std::uint64_t read_u64(const json& v, std::string_view where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw ConfigError(std::string(where) + ": negative value");
    return static_cast<std::uint64_t>(i);
  }
  if (!v.is_string()) throw ConfigError(std::string(where) + ": expected an integer");
  const std::string s = v.get<std::string>();
  std::size_t pos = 0;
  std::uint64_t n = 0;
  try {
    n = std::stoull(s, &pos, 0);
  } catch (const std::exception&) {
    throw ConfigError(std::string(where) + ": cannot parse '" + s + "'");
  }
  std::string suffix = s.substr(pos);
  suffix.erase(std::remove_if(suffix.begin(), suffix.end(), [](unsigned char c) { return std::isspace(c); }),
               suffix.end());
  if (suffix.empty() || suffix == "B") return n;
  if (suffix == "KiB") return n << 10;
  if (suffix == "MiB") return n << 20;
  if (suffix == "GiB") return n << 30;
  throw ConfigError(std::string(where) + ": unknown size suffix '" + suffix + "'");
}

int read_int(const json& v, std::string_view where) {
  if (v.is_number_integer()) return v.get<int>();
  const auto u = read_u64(v, where);
  if (u > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw ConfigError(std::string(where) + ": value out of range");
  }
  return static_cast<int>(u);
}

bool read_bool(const json& v, std::string_view where) {
  if (!v.is_boolean()) throw ConfigError(std::string(where) + ": expected a boolean");
  return v.get<bool>();
}

std::string read_string(const json& v, std::string_view where) {
  if (!v.is_string()) throw ConfigError(std::string(where) + ": expected a string");
  return v.get<std::string>();
}

Position read_position(const json& v, std::string_view where) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(where) + ": expected [row, col]");
  return {read_int(v[0], where), read_int(v[1], where)};
}

CoherenceMode read_mode(const json& v, std::string_view where) {
  const auto s = read_string(v, where);
  if (auto m = coherence_mode_from_string(s)) return *m;
  throw ConfigError(std::string(where) + ": unknown coherence mode '" + s + "'");
}

TileSpec read_tile(const json& v, int index, int cols) {
  const std::string where = "tiles[" + std::to_string(index) + "]";
  TileSpec t;
  t.position = {cols > 0 ? index / cols : 0, cols > 0 ? index % cols : index};
  if (v.is_string()) {
    auto k = tile_kind_from_string(v.get<std::string>());
    if (!k) throw ConfigError(where + ": unknown tile kind '" + v.get<std::string>() + "'");
    t.kind = *k;
    return t;
  }
  check_keys(v, where, {"kind", "position", "accelerator", "coherence"});
  if (!v.contains("kind")) throw ConfigError(where + ": missing 'kind'");
  auto k = tile_kind_from_string(read_string(v["kind"], where));
  if (!k) throw ConfigError(where + ": unknown tile kind");
  t.kind = *k;
  if (v.contains("position")) t.position = read_position(v["position"], where);
  if (v.contains("accelerator")) t.accelerator = read_string(v["accelerator"], where);
  if (v.contains("coherence")) t.coherence_mode = read_mode(v["coherence"], where);
  return t;
}

AcceleratorParams read_accelerator(const std::string& id, const json& v) {
  const std::string where = "accelerators." + id;
  check_keys(v, where,
             {"burst_len_words", "num_bursts", "compute_cycles_per_burst", "plm_words", "batches",
              "output_ratio", "transform", "transform_arg"});
  AcceleratorParams a;
  a.id = id;
  if (v.contains("burst_len_words")) a.burst_len_words = read_int(v["burst_len_words"], where);
  if (v.contains("num_bursts")) a.num_bursts = read_int(v["num_bursts"], where);
  if (v.contains("compute_cycles_per_burst"))
    a.compute_cycles_per_burst = read_int(v["compute_cycles_per_burst"], where);
  a.plm_words = v.contains("plm_words") ? read_int(v["plm_words"], where) : 2 * a.burst_len_words;
  if (v.contains("batches")) a.batches = read_int(v["batches"], where);
  if (v.contains("output_ratio")) {
    const auto& r = v["output_ratio"];
    if (r.is_array() && r.size() == 2) {
      a.output_num = read_int(r[0], where);
      a.output_den = read_int(r[1], where);
    } else if (r.is_string()) {
      const auto s = r.get<std::string>();
      const auto slash = s.find('/');
      try {
        a.output_num = std::stoi(s.substr(0, slash));
        a.output_den = slash == std::string::npos ? 1 : std::stoi(s.substr(slash + 1));
      } catch (const std::exception&) {
        throw ConfigError(where + ".output_ratio: cannot parse '" + s + "'");
      }
    } else {
      a.output_num = read_int(r, where);
      a.output_den = 1;
    }
    if (a.output_num > 0 && a.output_den > 0) {
      const int g = std::gcd(a.output_num, a.output_den);
      a.output_num /= g;
      a.output_den /= g;
    }
  }
  if (v.contains("transform")) {
    const auto s = read_string(v["transform"], where);
    if (s == "copy") {
      a.transform = Transform::Copy;
    } else if (s == "add") {
      a.transform = Transform::AddConst;
    } else {
      throw ConfigError(where + ": unknown transform '" + s + "'");
    }
  }
  if (v.contains("transform_arg")) a.transform_arg = read_u64(v["transform_arg"], where);
  return a;
}

AddrRef read_addr(const json& op, std::string_view where) {
  AddrRef r;
  if (op.contains("buffer")) {
    r.buffer = read_string(op["buffer"], where);
    if (op.contains("offset")) r.offset = read_u64(op["offset"], where);
  } else if (op.contains("addr")) {
    r.offset = read_u64(op["addr"], where);
  } else {
    throw ConfigError(std::string(where) + ": needs 'addr' or 'buffer'");
  }
  return r;
}

BufferInit read_init(const json& v, std::string_view where) {
  const auto s = read_string(v, where);
  if (s == "none") return BufferInit::None;
  if (s == "zero") return BufferInit::Zero;
  if (s == "index") return BufferInit::Index;
  if (s == "random") return BufferInit::Random;
  if (s == "constant") return BufferInit::Constant;
  throw ConfigError(std::string(where) + ": unknown init pattern '" + s + "'");
}

InvocationSpec read_invocation(const json& v, std::string_view where) {
  check_keys(v, where, {"name", "accelerator", "src", "dst", "mode", "after", "p2p_from"});
  InvocationSpec inv;
  if (!v.contains("name") || !v.contains("accelerator")) {
    throw ConfigError(std::string(where) + ": invocation needs 'name' and 'accelerator'");
  }
  inv.name = read_string(v["name"], where);
  inv.accelerator = read_position(v["accelerator"], where);
  if (v.contains("src")) inv.src = read_string(v["src"], where);
  if (v.contains("dst")) inv.dst = read_string(v["dst"], where);
  if (v.contains("mode")) inv.mode = read_mode(v["mode"], where);
  if (v.contains("after")) {
    if (!v["after"].is_array()) throw ConfigError(std::string(where) + ".after: expected a list");
    for (const auto& a : v["after"]) inv.after.push_back(read_string(a, where));
  }
  if (v.contains("p2p_from")) inv.p2p_from = read_string(v["p2p_from"], where);
  return inv;
}

ScriptOp read_op(const json& v, std::string_view where) {
  if (!v.is_object() || !v.contains("op")) throw ConfigError(std::string(where) + ": op needs an 'op' key");
  const auto name = read_string(v["op"], where);
  ScriptOp op;
  if (name == "write_reg") {
    check_keys(v, where, {"op", "tile", "offset", "value"});
    op.kind = OpKind::WriteReg;
    op.tile = read_position(v.at("tile"), where);
    op.reg_offset = read_u64(v.at("offset"), where);
    op.value = read_u64(v.at("value"), where);
  } else if (name == "read_reg") {
    check_keys(v, where, {"op", "tile", "offset"});
    op.kind = OpKind::ReadReg;
    op.tile = read_position(v.at("tile"), where);
    op.reg_offset = read_u64(v.at("offset"), where);
  } else if (name == "load") {
    check_keys(v, where, {"op", "addr", "buffer", "offset"});
    op.kind = OpKind::Load;
    op.addr = read_addr(v, where);
  } else if (name == "store") {
    check_keys(v, where, {"op", "addr", "buffer", "offset", "value"});
    op.kind = OpKind::Store;
    op.addr = read_addr(v, where);
    op.value = read_u64(v.at("value"), where);
  } else if (name == "flush_l2") {
    check_keys(v, where, {"op"});
    op.kind = OpKind::FlushL2;
  } else if (name == "esp_alloc") {
    check_keys(v, where, {"op", "name", "bytes", "partition", "init", "value"});
    op.kind = OpKind::EspAlloc;
    op.name = read_string(v.at("name"), where);
    op.bytes = read_u64(v.at("bytes"), where);
    if (v.contains("partition")) op.partition = read_int(v["partition"], where);
    if (v.contains("init")) op.init = read_init(v["init"], where);
    if (v.contains("value")) op.value = read_u64(v["value"], where);
  } else if (name == "esp_free") {
    check_keys(v, where, {"op", "name"});
    op.kind = OpKind::EspFree;
    op.name = read_string(v.at("name"), where);
  } else if (name == "esp_run") {
    check_keys(v, where, {"op", "name", "invocations", "flush"});
    op.kind = OpKind::EspRun;
    if (v.contains("name")) op.name = read_string(v["name"], where);
    if (v.contains("flush")) op.flush_protocol = read_bool(v["flush"], where);
    if (!v.contains("invocations") || !v["invocations"].is_array()) {
      throw ConfigError(std::string(where) + ": esp_run needs an 'invocations' list");
    }
    int i = 0;
    for (const auto& inv : v["invocations"]) {
      op.invocations.push_back(read_invocation(inv, std::string(where) + ".invocations[" + std::to_string(i++) + "]"));
    }
  } else if (name == "wait_irq") {
    check_keys(v, where, {"op", "tile"});
    op.kind = OpKind::WaitIrq;
    op.tile = read_position(v.at("tile"), where);
  } else if (name == "barrier") {
    check_keys(v, where, {"op"});
    op.kind = OpKind::Barrier;
  } else {
    throw ConfigError(std::string(where) + ": unknown op '" + name + "'");
  }
  return op;
}

json position_json(Position p) { return json::array({p.row, p.col}); }

}  // namespace

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::WriteReg: return "write_reg";
    case OpKind::ReadReg: return "read_reg";
    case OpKind::Load: return "load";
    case OpKind::Store: return "store";
    case OpKind::FlushL2: return "flush_l2";
    case OpKind::EspAlloc: return "esp_alloc";
    case OpKind::EspFree: return "esp_free";
    case OpKind::EspRun: return "esp_run";
    case OpKind::WaitIrq: return "wait_irq";
    case OpKind::Barrier: return "barrier";
  }
  return "?";
}

SocConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"grid", "tiles", "noc", "cache", "dram", "accelerators", "workload", "seed"});
  SocConfig cfg;
  if (!doc.contains("grid") || !doc.contains("tiles")) throw ConfigError("config: 'grid' and 'tiles' are required");

  const auto& grid = doc["grid"];
  check_keys(grid, "grid", {"rows", "cols"});
  cfg.rows = read_int(grid.at("rows"), "grid.rows");
  cfg.cols = read_int(grid.at("cols"), "grid.cols");

  if (!doc["tiles"].is_array()) throw ConfigError("tiles: expected a list");
  int index = 0;
  for (const auto& t : doc["tiles"]) cfg.tiles.push_back(read_tile(t, index++, cfg.cols));

  if (doc.contains("noc")) {
    const auto& n = doc["noc"];
    check_keys(n, "noc",
               {"planes", "flit_width_bits", "input_queue_depth_flits", "ni_packet_slots", "ni_outbound_packets",
                "single_coherence_plane"});
    if (n.contains("planes")) cfg.noc.planes = read_int(n["planes"], "noc.planes");
    if (n.contains("flit_width_bits")) cfg.noc.flit_width_bits = read_int(n["flit_width_bits"], "noc.flit_width_bits");
    if (n.contains("input_queue_depth_flits"))
      cfg.noc.input_queue_depth_flits = read_int(n["input_queue_depth_flits"], "noc.input_queue_depth_flits");
    if (n.contains("ni_packet_slots")) cfg.noc.ni_packet_slots = read_int(n["ni_packet_slots"], "noc.ni_packet_slots");
    if (n.contains("ni_outbound_packets"))
      cfg.noc.ni_outbound_packets = read_int(n["ni_outbound_packets"], "noc.ni_outbound_packets");
    if (n.contains("single_coherence_plane"))
      cfg.noc.single_coherence_plane = read_bool(n["single_coherence_plane"], "noc.single_coherence_plane");
  }

  if (doc.contains("cache")) {
    const auto& c = doc["cache"];
    check_keys(c, "cache",
               {"line_size_bytes", "l2_size_bytes", "l2_ways", "l2_mshrs", "llc_size_bytes", "llc_ways"});
    if (c.contains("line_size_bytes")) cfg.cache.line_size_bytes = read_int(c["line_size_bytes"], "cache");
    if (c.contains("l2_size_bytes")) cfg.cache.l2_size_bytes = read_int(c["l2_size_bytes"], "cache");
    if (c.contains("l2_ways")) cfg.cache.l2_ways = read_int(c["l2_ways"], "cache");
    if (c.contains("l2_mshrs")) cfg.cache.l2_mshrs = read_int(c["l2_mshrs"], "cache");
    if (c.contains("llc_size_bytes")) cfg.cache.llc_size_bytes = read_int(c["llc_size_bytes"], "cache");
    if (c.contains("llc_ways")) cfg.cache.llc_ways = read_int(c["llc_ways"], "cache");
  }

  if (doc.contains("dram")) {
    const auto& d = doc["dram"];
    check_keys(d, "dram", {"base", "size", "latency_cycles", "words_per_cycle"});
    if (d.contains("base")) cfg.dram.base = read_u64(d["base"], "dram.base");
    if (d.contains("size")) cfg.dram.size = read_u64(d["size"], "dram.size");
    if (d.contains("latency_cycles")) cfg.dram.latency_cycles = read_int(d["latency_cycles"], "dram.latency_cycles");
    if (d.contains("words_per_cycle")) cfg.dram.words_per_cycle = read_int(d["words_per_cycle"], "dram.words_per_cycle");
  }

  if (doc.contains("accelerators")) {
    const auto& a = doc["accelerators"];
    if (!a.is_object()) throw ConfigError("accelerators: expected an object");
    for (const auto& [id, params] : a.items()) cfg.accelerators.emplace(id, read_accelerator(id, params));
  }

  if (doc.contains("workload")) {
    const auto& w = doc["workload"];
    check_keys(w, "workload", {"scripts", "deadlock_window", "monitor_interval"});
    if (w.contains("deadlock_window")) cfg.sim.deadlock_window = read_u64(w["deadlock_window"], "workload.deadlock_window");
    if (w.contains("monitor_interval"))
      cfg.sim.monitor_interval = read_u64(w["monitor_interval"], "workload.monitor_interval");
    if (w.contains("scripts")) {
      if (!w["scripts"].is_array()) throw ConfigError("workload.scripts: expected a list");
      int si = 0;
      for (const auto& s : w["scripts"]) {
        const std::string where = "workload.scripts[" + std::to_string(si++) + "]";
        check_keys(s, where, {"processor", "ops"});
        ProcessorScript script;
        script.processor = read_position(s.at("processor"), where);
        if (s.contains("ops")) {
          if (!s["ops"].is_array()) throw ConfigError(where + ".ops: expected a list");
          int oi = 0;
          for (const auto& op : s["ops"]) script.ops.push_back(read_op(op, where + ".ops[" + std::to_string(oi++) + "]"));
        }
        cfg.workload.scripts.push_back(std::move(script));
      }
    }
  }

  if (doc.contains("seed")) cfg.seed = read_u64(doc["seed"], "seed");
  return cfg;
}

json config_to_json(const SocConfig& cfg) {
  json doc;
  doc["grid"] = {{"rows", cfg.rows}, {"cols", cfg.cols}};
  json tiles = json::array();
  for (const auto& t : cfg.tiles) {
    json j = {{"kind", std::string(to_string(t.kind))}, {"position", position_json(t.position)}};
    if (!t.accelerator.empty()) j["accelerator"] = t.accelerator;
    if (t.coherence_mode) j["coherence"] = std::string(to_string(*t.coherence_mode));
    tiles.push_back(j);
  }
  doc["tiles"] = tiles;
  doc["noc"] = {{"planes", cfg.noc.planes},
                {"flit_width_bits", cfg.noc.flit_width_bits},
                {"input_queue_depth_flits", cfg.noc.input_queue_depth_flits},
                {"ni_packet_slots", cfg.noc.ni_packet_slots},
                {"ni_outbound_packets", cfg.noc.ni_outbound_packets},
                {"single_coherence_plane", cfg.noc.single_coherence_plane}};
  doc["cache"] = {{"line_size_bytes", cfg.cache.line_size_bytes}, {"l2_size_bytes", cfg.cache.l2_size_bytes},
                  {"l2_ways", cfg.cache.l2_ways},                 {"l2_mshrs", cfg.cache.l2_mshrs},
                  {"llc_size_bytes", cfg.cache.llc_size_bytes},   {"llc_ways", cfg.cache.llc_ways}};
  doc["dram"] = {{"base", cfg.dram.base},
                 {"size", cfg.dram.size},
                 {"latency_cycles", cfg.dram.latency_cycles},
                 {"words_per_cycle", cfg.dram.words_per_cycle}};
  json accs = json::object();
  for (const auto& [id, a] : cfg.accelerators) {
    accs[id] = {{"burst_len_words", a.burst_len_words},
                {"num_bursts", a.num_bursts},
                {"compute_cycles_per_burst", a.compute_cycles_per_burst},
                {"plm_words", a.plm_words},
                {"batches", a.batches},
                {"output_ratio", json::array({a.output_num, a.output_den})},
                {"transform", a.transform == Transform::Copy ? "copy" : "add"},
                {"transform_arg", a.transform_arg}};
  }
  doc["accelerators"] = accs;
  json scripts = json::array();
  for (const auto& s : cfg.workload.scripts) {
    json ops = json::array();
    for (const auto& op : s.ops) {
      json j = {{"op", std::string(to_string(op.kind))}};
      switch (op.kind) {
        case OpKind::WriteReg:
          j["tile"] = position_json(op.tile);
          j["offset"] = op.reg_offset;
          j["value"] = op.value;
          break;
        case OpKind::ReadReg:
          j["tile"] = position_json(op.tile);
          j["offset"] = op.reg_offset;
          break;
        case OpKind::Load:
        case OpKind::Store:
          if (op.addr.buffer.empty()) {
            j["addr"] = op.addr.offset;
          } else {
            j["buffer"] = op.addr.buffer;
            j["offset"] = op.addr.offset;
          }
          if (op.kind == OpKind::Store) j["value"] = op.value;
          break;
        case OpKind::EspAlloc: {
          j["name"] = op.name;
          j["bytes"] = op.bytes;
          if (op.partition) j["partition"] = *op.partition;
          static constexpr const char* kInit[] = {"none", "zero", "index", "random", "constant"};
          j["init"] = kInit[static_cast<int>(op.init)];
          j["value"] = op.value;
          break;
        }
        case OpKind::EspFree:
          j["name"] = op.name;
          break;
        case OpKind::EspRun: {
          j["name"] = op.name;
          j["flush"] = op.flush_protocol;
          json invs = json::array();
          for (const auto& inv : op.invocations) {
            json ij = {{"name", inv.name}, {"accelerator", position_json(inv.accelerator)}};
            if (!inv.src.empty()) ij["src"] = inv.src;
            if (!inv.dst.empty()) ij["dst"] = inv.dst;
            if (inv.mode) ij["mode"] = std::string(to_string(*inv.mode));
            if (!inv.after.empty()) ij["after"] = inv.after;
            if (!inv.p2p_from.empty()) ij["p2p_from"] = inv.p2p_from;
            invs.push_back(ij);
          }
          j["invocations"] = invs;
          break;
        }
        case OpKind::WaitIrq:
          j["tile"] = position_json(op.tile);
          break;
        case OpKind::FlushL2:
        case OpKind::Barrier:
          break;
      }
      ops.push_back(j);
    }
    scripts.push_back({{"processor", position_json(s.processor)}, {"ops", ops}});
  }
  doc["workload"] = {{"scripts", scripts},
                     {"deadlock_window", cfg.sim.deadlock_window},
                     {"monitor_interval", cfg.sim.monitor_interval}};
  doc["seed"] = cfg.seed;
  return doc;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::string_view to_string(ConfigErrorCode c) {
  switch (c) {
    case ConfigErrorCode::GridMismatch: return "GridMismatch";
    case ConfigErrorCode::NoAuxTile: return "NoAuxTile";
    case ConfigErrorCode::MultipleAuxTiles: return "MultipleAuxTiles";
    case ConfigErrorCode::NoProcessorTile: return "NoProcessorTile";
    case ConfigErrorCode::MemoryTileCountOutOfRange: return "MemoryTileCountOutOfRange";
    case ConfigErrorCode::UnknownAcceleratorRef: return "UnknownAcceleratorRef";
    case ConfigErrorCode::CoherenceModeMismatch: return "CoherenceModeMismatch";
    case ConfigErrorCode::BadAcceleratorParams: return "BadAcceleratorParams";
    case ConfigErrorCode::BadNocParams: return "BadNocParams";
    case ConfigErrorCode::BadCacheParams: return "BadCacheParams";
    case ConfigErrorCode::BadDramParams: return "BadDramParams";
    case ConfigErrorCode::BadWorkload: return "BadWorkload";
    case ConfigErrorCode::GranularityMismatch: return "GranularityMismatch";
    case ConfigErrorCode::AllocExhausted: return "AllocExhausted";
    case ConfigErrorCode::IndivisibleDramSize: return "IndivisibleDramSize";
  }
  return "?";
}

bool ValidationResult::has(ConfigErrorCode c) const {
  return std::any_of(violations.begin(), violations.end(), [c](const Violation& v) { return v.code == c; });
}

std::vector<TileId> ValidatedSoC::tiles_of_kind(TileKind k) const {
  std::vector<TileId> out;
  for (std::size_t i = 0; i < cfg_.tiles.size(); ++i) {
    if (cfg_.tiles[i].kind == k) out.push_back(static_cast<TileId>(i));
  }
  return out;
}

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Memory map construction shared by validation (on a raw config) and
// build_memory_map (on a validated one).
MemoryMap make_memory_map(const SocConfig& cfg) {
  MemoryMap map;
  map.dram_base = cfg.dram.base;
  map.dram_size = cfg.dram.size;
  std::vector<TileId> mem_tiles;
  std::vector<TileId> non_empty;
  for (std::size_t i = 0; i < cfg.tiles.size(); ++i) {
    if (cfg.tiles[i].kind == TileKind::Memory) mem_tiles.push_back(static_cast<TileId>(i));
    if (cfg.tiles[i].kind != TileKind::Empty) non_empty.push_back(static_cast<TileId>(i));
  }
  if (mem_tiles.empty() || cfg.dram.size % mem_tiles.size() != 0) {
    throw MemoryMapError(ConfigErrorCode::IndivisibleDramSize,
                         "DRAM size " + std::to_string(cfg.dram.size) + " is not divisible by " +
                             std::to_string(mem_tiles.size()) + " memory tiles");
  }
  const std::uint64_t part = cfg.dram.size / mem_tiles.size();
  for (std::size_t i = 0; i < mem_tiles.size(); ++i) {
    map.partitions.push_back({mem_tiles[i], cfg.dram.base + i * part, part});
  }
  const std::uint64_t aperture_span = non_empty.size() * kApertureBytes;
  if (aperture_span > cfg.dram.base) {
    throw MemoryMapError(ConfigErrorCode::BadDramParams, "DRAM base too low to fit register apertures below it");
  }
  const Addr aperture_base = cfg.dram.base - aperture_span;
  for (std::size_t i = 0; i < non_empty.size(); ++i) {
    map.register_apertures.emplace(non_empty[i], Aperture{aperture_base + i * kApertureBytes, kApertureBytes});
  }
  return map;
}

void validate_workload(const SocConfig& cfg, std::vector<Violation>& out) {
  auto bad = [&](ConfigErrorCode c, std::string msg) { out.push_back({c, std::move(msg)}); };
  const auto in_grid = [&](Position p) { return p.row >= 0 && p.col >= 0 && p.row < cfg.rows && p.col < cfg.cols; };
  const auto kind_at = [&](Position p) {
    return cfg.tiles[static_cast<std::size_t>(p.row * cfg.cols + p.col)].kind;
  };
  const auto accel_params = [&](Position p) -> const AcceleratorParams* {
    const auto& t = cfg.tiles[static_cast<std::size_t>(p.row * cfg.cols + p.col)];
    auto it = cfg.accelerators.find(t.accelerator);
    return it == cfg.accelerators.end() ? nullptr : &it->second;
  };

  std::set<Position> seen_processors;
  std::map<std::optional<int>, std::uint64_t> hinted_bytes;
  std::uint64_t total_bytes = 0;
  const auto line = static_cast<std::uint64_t>(std::max(cfg.cache.line_size_bytes, 1));
  const auto mem_tiles = static_cast<int>(
      std::count_if(cfg.tiles.begin(), cfg.tiles.end(), [](const TileSpec& t) { return t.kind == TileKind::Memory; }));

  for (const auto& script : cfg.workload.scripts) {
    const std::string who = "script for " + to_string(script.processor);
    if (!in_grid(script.processor) || kind_at(script.processor) != TileKind::Processor) {
      bad(ConfigErrorCode::BadWorkload, who + ": position is not a processor tile");
      continue;
    }
    if (!seen_processors.insert(script.processor).second) {
      bad(ConfigErrorCode::BadWorkload, who + ": processor has more than one script");
    }
    std::map<std::string, std::uint64_t> live;  // allocated buffer -> bytes
    for (std::size_t oi = 0; oi < script.ops.size(); ++oi) {
      const auto& op = script.ops[oi];
      const std::string at = who + " op " + std::to_string(oi) + " (" + std::string(to_string(op.kind)) + ")";
      switch (op.kind) {
        case OpKind::WriteReg:
        case OpKind::ReadReg:
          if (!in_grid(op.tile) || kind_at(op.tile) == TileKind::Empty) {
            bad(ConfigErrorCode::BadWorkload, at + ": register target is not a populated tile");
          }
          if (op.reg_offset % kWordBytes != 0 || op.reg_offset >= kApertureBytes) {
            bad(ConfigErrorCode::BadWorkload, at + ": register offset out of aperture");
          }
          break;
        case OpKind::WaitIrq:
          if (!in_grid(op.tile) || kind_at(op.tile) != TileKind::Accelerator) {
            bad(ConfigErrorCode::BadWorkload, at + ": wait_irq target is not an accelerator tile");
          }
          break;
        case OpKind::Load:
        case OpKind::Store:
          if (op.addr.offset % kWordBytes != 0) bad(ConfigErrorCode::BadWorkload, at + ": address not word aligned");
          if (!op.addr.buffer.empty()) {
            auto it = live.find(op.addr.buffer);
            if (it == live.end()) {
              bad(ConfigErrorCode::BadWorkload, at + ": buffer '" + op.addr.buffer + "' is not allocated");
            } else if (op.addr.offset >= it->second) {
              bad(ConfigErrorCode::BadWorkload, at + ": offset beyond buffer '" + op.addr.buffer + "'");
            }
          }
          break;
        case OpKind::EspAlloc: {
          if (op.bytes == 0) bad(ConfigErrorCode::BadWorkload, at + ": zero-sized allocation");
          if (live.count(op.name) != 0) bad(ConfigErrorCode::BadWorkload, at + ": buffer '" + op.name + "' already allocated");
          if (op.partition && (*op.partition < 0 || *op.partition >= mem_tiles)) {
            bad(ConfigErrorCode::BadWorkload, at + ": partition index out of range");
          }
          const std::uint64_t rounded = (op.bytes + line - 1) / line * line;
          live[op.name] = op.bytes;
          total_bytes += rounded;
          hinted_bytes[op.partition] += rounded;
          break;
        }
        case OpKind::EspFree:
          if (live.erase(op.name) == 0) bad(ConfigErrorCode::BadWorkload, at + ": freeing unallocated buffer '" + op.name + "'");
          break;
        case OpKind::EspRun: {
          if (op.invocations.empty()) bad(ConfigErrorCode::BadWorkload, at + ": no invocations");
          std::map<std::string, const InvocationSpec*> by_name;
          for (const auto& inv : op.invocations) {
            if (!by_name.emplace(inv.name, &inv).second) {
              bad(ConfigErrorCode::BadWorkload, at + ": duplicate invocation name '" + inv.name + "'");
            }
          }
          std::map<std::string, std::string> consumer_of;
          for (const auto& inv : op.invocations) {
            const std::string iat = at + " invocation '" + inv.name + "'";
            if (!in_grid(inv.accelerator) || kind_at(inv.accelerator) != TileKind::Accelerator) {
              bad(ConfigErrorCode::BadWorkload, iat + ": target is not an accelerator tile");
              continue;
            }
            const auto* params = accel_params(inv.accelerator);
            if (params == nullptr) continue;  // reported as UnknownAcceleratorRef
            const auto load_bytes = static_cast<std::uint64_t>(params->total_bursts()) *
                                    static_cast<std::uint64_t>(params->burst_len_words) * kWordBytes;
            const auto store_bytes = static_cast<std::uint64_t>(params->total_bursts()) *
                                     static_cast<std::uint64_t>(params->store_burst_words()) * kWordBytes;
            if (inv.p2p_from.empty()) {
              auto it = live.find(inv.src);
              if (inv.src.empty() || it == live.end()) {
                bad(ConfigErrorCode::BadWorkload, iat + ": source buffer '" + inv.src + "' is not allocated");
              } else if (it->second < load_bytes) {
                bad(ConfigErrorCode::BadWorkload, iat + ": source buffer smaller than the accelerator input");
              }
            } else if (!inv.src.empty()) {
              bad(ConfigErrorCode::BadWorkload, iat + ": P2P consumer must not name a source buffer");
            }
            bool drains_p2p = false;
            for (const auto& other : op.invocations) drains_p2p |= other.p2p_from == inv.name;
            if (!drains_p2p) {
              auto it = live.find(inv.dst);
              if (inv.dst.empty() || it == live.end()) {
                bad(ConfigErrorCode::BadWorkload, iat + ": destination buffer '" + inv.dst + "' is not allocated");
              } else if (it->second < store_bytes) {
                bad(ConfigErrorCode::BadWorkload, iat + ": destination buffer smaller than the accelerator output");
              }
            } else if (!inv.dst.empty()) {
              bad(ConfigErrorCode::BadWorkload, iat + ": P2P producer must not name a destination buffer");
            }
            for (const auto& dep : inv.after) {
              if (by_name.count(dep) == 0) bad(ConfigErrorCode::BadWorkload, iat + ": unknown dependency '" + dep + "'");
            }
            if (!inv.p2p_from.empty()) {
              auto pit = by_name.find(inv.p2p_from);
              if (pit == by_name.end()) {
                bad(ConfigErrorCode::BadWorkload, iat + ": unknown P2P producer '" + inv.p2p_from + "'");
                continue;
              }
              const auto& prod = *pit->second;
              if (!consumer_of.emplace(prod.name, inv.name).second) {
                bad(ConfigErrorCode::BadWorkload, iat + ": producer '" + prod.name + "' already has a P2P consumer");
              }
              if (prod.accelerator == inv.accelerator) {
                bad(ConfigErrorCode::BadWorkload, iat + ": P2P producer and consumer share a tile");
              }
              if (std::find(inv.after.begin(), inv.after.end(), prod.name) != inv.after.end()) {
                bad(ConfigErrorCode::BadWorkload, iat + ": a P2P consumer runs concurrently with its producer");
              }
              if (in_grid(prod.accelerator) && kind_at(prod.accelerator) == TileKind::Accelerator) {
                if (const auto* pp = accel_params(prod.accelerator)) {
                  if (pp->store_burst_words() != params->burst_len_words ||
                      pp->total_bursts() != params->total_bursts()) {
                    bad(ConfigErrorCode::GranularityMismatch,
                        iat + ": producer store burst (" + std::to_string(pp->store_burst_words()) + " words x " +
                            std::to_string(pp->total_bursts()) + ") does not match consumer load burst (" +
                            std::to_string(params->burst_len_words) + " words x " +
                            std::to_string(params->total_bursts()) + ")");
                  }
                }
              }
            }
          }
          // Dependency graph must be acyclic (DFS with colors).
          std::map<std::string, int> color;
          std::function<bool(const std::string&)> cyclic = [&](const std::string& n) {
            color[n] = 1;
            auto it = by_name.find(n);
            if (it != by_name.end()) {
              for (const auto& d : it->second->after) {
                if (by_name.count(d) == 0) continue;
                if (color[d] == 1) return true;
                if (color[d] == 0 && cyclic(d)) return true;
              }
            }
            color[n] = 2;
            return false;
          };
          for (const auto& [n, _] : by_name) {
            if (color[n] == 0 && cyclic(n)) {
              bad(ConfigErrorCode::BadWorkload, at + ": invocation dependencies form a cycle");
              break;
            }
          }
          break;
        }
        case OpKind::FlushL2:
        case OpKind::Barrier:
          break;
      }
    }
  }

  if (mem_tiles >= 1 && cfg.dram.size % static_cast<std::uint64_t>(mem_tiles) == 0) {
    const std::uint64_t part = cfg.dram.size / static_cast<std::uint64_t>(mem_tiles);
    if (total_bytes > cfg.dram.size) {
      bad(ConfigErrorCode::AllocExhausted, "esp_alloc requests " + std::to_string(total_bytes) +
                                               " bytes, more than the DRAM size " + std::to_string(cfg.dram.size));
    }
    for (const auto& [hint, bytes] : hinted_bytes) {
      if (hint && bytes > part) {
        bad(ConfigErrorCode::AllocExhausted,
            "esp_alloc requests " + std::to_string(bytes) + " bytes in partition " + std::to_string(*hint));
      }
    }
  }
}

}  // namespace

ValidationResult validate_config(const SocConfig& raw) {
  ValidationResult result;
  auto& out = result.violations;
  auto bad = [&](ConfigErrorCode c, std::string msg) { out.push_back({c, std::move(msg)}); };

  bool grid_ok = true;
  if (raw.rows <= 0 || raw.cols <= 0) {
    bad(ConfigErrorCode::GridMismatch, "grid dimensions must be positive");
    grid_ok = false;
  } else if (static_cast<std::size_t>(raw.rows) * static_cast<std::size_t>(raw.cols) != raw.tiles.size()) {
    bad(ConfigErrorCode::GridMismatch, "grid is " + std::to_string(raw.rows) + "x" + std::to_string(raw.cols) +
                                           " but " + std::to_string(raw.tiles.size()) + " tiles are listed");
    grid_ok = false;
  } else if (raw.tiles.size() > 64) {
    bad(ConfigErrorCode::GridMismatch, "at most 64 tiles are supported");
    grid_ok = false;
  }
  if (grid_ok) {
    for (std::size_t i = 0; i < raw.tiles.size(); ++i) {
      const Position expect{static_cast<int>(i) / raw.cols, static_cast<int>(i) % raw.cols};
      if (raw.tiles[i].position != expect) {
        bad(ConfigErrorCode::GridMismatch, "tile " + std::to_string(i) + " declares position " +
                                               to_string(raw.tiles[i].position) + ", expected " + to_string(expect));
      }
    }
  }

  std::vector<Position> aux;
  int processors = 0;
  int memories = 0;
  for (const auto& t : raw.tiles) {
    switch (t.kind) {
      case TileKind::Auxiliary: aux.push_back(t.position); break;
      case TileKind::Processor: ++processors; break;
      case TileKind::Memory: ++memories; break;
      case TileKind::Accelerator:
        if (raw.accelerators.count(t.accelerator) == 0) {
          bad(ConfigErrorCode::UnknownAcceleratorRef,
              "accelerator tile " + to_string(t.position) + " references unknown model '" + t.accelerator + "'");
        }
        break;
      case TileKind::Empty: break;
    }
    if (t.coherence_mode.has_value() != (t.kind == TileKind::Accelerator)) {
      bad(ConfigErrorCode::CoherenceModeMismatch,
          "tile " + to_string(t.position) + ": a coherence mode is required on accelerator tiles and only there");
    }
  }
  if (aux.empty()) bad(ConfigErrorCode::NoAuxTile, "no auxiliary tile");
  if (aux.size() > 1) {
    std::string where;
    for (auto p : aux) where += (where.empty() ? "" : ", ") + to_string(p);
    bad(ConfigErrorCode::MultipleAuxTiles, "multiple auxiliary tiles at " + where);
  }
  if (processors == 0) bad(ConfigErrorCode::NoProcessorTile, "no processor tile");
  if (memories < 1 || memories > 4) {
    bad(ConfigErrorCode::MemoryTileCountOutOfRange,
        std::to_string(memories) + " memory tiles; between 1 and 4 are supported");
  }

  for (const auto& [id, a] : raw.accelerators) {
    const std::string who = "accelerator model '" + id + "'";
    if (a.burst_len_words <= 0 || a.num_bursts <= 0 || a.compute_cycles_per_burst <= 0 || a.plm_words <= 0 ||
        a.batches <= 0 || a.output_num <= 0 || a.output_den <= 0) {
      bad(ConfigErrorCode::BadAcceleratorParams, who + ": all counts must be positive");
      continue;
    }
    if (a.plm_words < 2 * a.burst_len_words) {
      bad(ConfigErrorCode::BadAcceleratorParams, who + ": PLM must hold two bursts for ping-pong buffering");
    }
    if ((a.burst_len_words * a.output_num) % a.output_den != 0) {
      bad(ConfigErrorCode::BadAcceleratorParams, who + ": output ratio does not give a whole store burst");
    }
  }

  const auto& n = raw.noc;
  if (n.planes < 6) bad(ConfigErrorCode::BadNocParams, "coherence, DMA and IO services need at least 6 NoC planes");
  if (n.flit_width_bits != 64) bad(ConfigErrorCode::BadNocParams, "only 64-bit flits are modeled");
  if (n.input_queue_depth_flits < 1 || n.ni_packet_slots < 1 || n.ni_outbound_packets < 1) {
    bad(ConfigErrorCode::BadNocParams, "queue depths must be positive");
  }

  const auto& c = raw.cache;
  if (!is_pow2(c.line_size_bytes) || c.line_size_bytes < static_cast<int>(kWordBytes)) {
    bad(ConfigErrorCode::BadCacheParams, "line size must be a power of two of at least one word");
  } else if (c.l2_ways < 1 || c.llc_ways < 1 || c.l2_mshrs < 1 || c.l2_size_bytes <= 0 || c.llc_size_bytes <= 0 ||
             c.l2_size_bytes % (c.line_size_bytes * c.l2_ways) != 0 ||
             c.llc_size_bytes % (c.line_size_bytes * c.llc_ways) != 0) {
    bad(ConfigErrorCode::BadCacheParams, "cache sizes must be whole multiples of line size x ways");
  }

  const auto& d = raw.dram;
  if (d.size == 0 || d.latency_cycles < 0 || d.words_per_cycle < 1) {
    bad(ConfigErrorCode::BadDramParams, "DRAM size, latency and bandwidth must be positive");
  } else if (c.line_size_bytes > 0 && d.base % static_cast<std::uint64_t>(c.line_size_bytes) != 0) {
    bad(ConfigErrorCode::BadDramParams, "DRAM base must be line aligned");
  } else if (grid_ok && memories >= 1 && memories <= 4) {
    try {
      (void)make_memory_map(raw);
    } catch (const MemoryMapError& e) {
      bad(e.code, e.what());
    }
  }

  if (grid_ok) validate_workload(raw, out);

  if (out.empty()) result.soc = ValidatedSoC(raw);
  return result;
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

const Partition* MemoryMap::partition_for(Addr a) const {
  for (const auto& p : partitions) {
    if (p.contains(a)) return &p;
  }
  return nullptr;
}

std::optional<TileId> MemoryMap::aperture_owner(Addr a) const {
  for (const auto& [tile, ap] : register_apertures) {
    if (ap.contains(a)) return tile;
  }
  return std::nullopt;
}

std::optional<std::size_t> MemoryMap::partition_index(TileId memory_tile) const {
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    if (partitions[i].tile == memory_tile) return i;
  }
  return std::nullopt;
}

MemoryMap build_memory_map(const ValidatedSoC& soc) { return make_memory_map(soc.config()); }

BufferAllocator::BufferAllocator(const MemoryMap& map, std::uint64_t align)
    : parts_(map.partitions), align_(align) {
  for (const auto& p : parts_) next_.push_back(p.base);
}

std::uint64_t BufferAllocator::free_bytes(std::size_t partition) const {
  return parts_[partition].base + parts_[partition].size - next_[partition];
}

std::optional<Addr> BufferAllocator::allocate(std::uint64_t bytes, std::optional<int> partition) {
  const std::uint64_t rounded = (bytes + align_ - 1) / align_ * align_;
  std::size_t idx = 0;
  if (partition) {
    if (*partition < 0 || static_cast<std::size_t>(*partition) >= parts_.size()) return std::nullopt;
    idx = static_cast<std::size_t>(*partition);
  } else {
    for (std::size_t i = 1; i < parts_.size(); ++i) {
      if (free_bytes(i) > free_bytes(idx)) idx = i;
    }
  }
  if (rounded > free_bytes(idx)) return std::nullopt;
  const Addr base = next_[idx];
  next_[idx] += rounded;
  return base;
}

Port route_xy(Position current, Position dst) {
  if (dst.col > current.col) return Port::East;
  if (dst.col < current.col) return Port::West;
  if (dst.row > current.row) return Port::South;
  if (dst.row < current.row) return Port::North;
  return Port::Local;
}

RoutingTables RoutingTables::xy(int rows, int cols) {
  const int n = rows * cols;
  std::vector<Port> table(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Port::Local);
  for (int r = 0; r < n; ++r) {
    for (int d = 0; d < n; ++d) {
      table[static_cast<std::size_t>(r * n + d)] = route_xy({r / cols, r % cols}, {d / cols, d % cols});
    }
  }
  return RoutingTables(rows, cols, std::move(table));
}

RoutingTables build_routing_tables(const ValidatedSoC& soc) { return RoutingTables::xy(soc.rows(), soc.cols()); }

PlaneId plane_for_message(MessageClass c) {
  switch (c) {
    case MessageClass::CohReq: return 1;
    case MessageClass::CohFwd: return 2;
    case MessageClass::CohRsp: return 3;
    case MessageClass::DmaReq: return 4;
    case MessageClass::IoIrq: return 5;
    case MessageClass::DmaRsp: return 6;
  }
  return 0;
}

PlaneMap::PlaneMap() {
  for (int i = 0; i < kNumMessageClasses; ++i) {
    planes_[static_cast<std::size_t>(i)] = plane_for_message(static_cast<MessageClass>(i));
  }
}

PlaneMap PlaneMap::single_coherence_plane() {
  PlaneMap m;
  m.planes_[static_cast<std::size_t>(MessageClass::CohFwd)] = 1;
  m.planes_[static_cast<std::size_t>(MessageClass::CohRsp)] = 1;
  return m;
}

}  // namespace espsim
