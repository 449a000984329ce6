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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "espsim/common.hpp"

namespace espsim {

// ---------------------------------------------------------------------------
// Declarative SoC description
// ---------------------------------------------------------------------------

struct NocParams {
  int planes = 6;
  int flit_width_bits = 64;
  int input_queue_depth_flits = 4;
  // Reassembly slots per plane on the tile side of the local port.
  int ni_packet_slots = 2;
  // Packets a tile may have queued for injection per plane.
  int ni_outbound_packets = 4;
  // Test hook: route all three coherence classes over plane 1.
  bool single_coherence_plane = false;

  bool operator==(const NocParams&) const = default;
};

struct CacheParams {
  int line_size_bytes = 64;
  int l2_size_bytes = 32 * 1024;
  int l2_ways = 4;
  int l2_mshrs = 4;
  int llc_size_bytes = 256 * 1024;
  int llc_ways = 8;

  int words_per_line() const { return line_size_bytes / static_cast<int>(kWordBytes); }
  bool operator==(const CacheParams&) const = default;
};

struct DramParams {
  Addr base = 0x8000'0000ULL;
  std::uint64_t size = 1ULL << 30;
  int latency_cycles = 30;
  int words_per_cycle = 1;

  bool operator==(const DramParams&) const = default;
};

enum class Transform : std::uint8_t { Copy, AddConst };

struct AcceleratorParams {
  std::string id;
  int burst_len_words = 16;
  int num_bursts = 1;
  int compute_cycles_per_burst = 1;
  int plm_words = 32;
  int batches = 1;
  // Store words per load word, as a reduced fraction.
  int output_num = 1;
  int output_den = 1;
  Transform transform = Transform::Copy;
  Word transform_arg = 0;

  int store_burst_words() const { return burst_len_words * output_num / output_den; }
  int total_bursts() const { return num_bursts * batches; }
  Word apply(Word w) const { return transform == Transform::AddConst ? w + transform_arg : w; }
  bool operator==(const AcceleratorParams&) const = default;
};

struct TileSpec {
  TileKind kind = TileKind::Empty;
  Position position;
  std::string accelerator;  // AcceleratorParams id, accelerator tiles only
  std::optional<CoherenceMode> coherence_mode;

  bool operator==(const TileSpec&) const = default;
};

/// Address operand of a script op: absolute, or relative to an allocated buffer.
struct AddrRef {
  std::string buffer;
  Addr offset = 0;

  bool operator==(const AddrRef&) const = default;
};

enum class BufferInit : std::uint8_t { None, Zero, Index, Random, Constant };

struct InvocationSpec {
  std::string name;
  Position accelerator;
  std::string src;  // buffer name; empty when fed by P2P
  std::string dst;  // buffer name; empty when draining by P2P
  std::optional<CoherenceMode> mode;
  std::vector<std::string> after;
  std::string p2p_from;  // producer invocation name

  bool operator==(const InvocationSpec&) const = default;
};

enum class OpKind : std::uint8_t {
  WriteReg,
  ReadReg,
  Load,
  Store,
  FlushL2,
  EspAlloc,
  EspFree,
  EspRun,
  WaitIrq,
  Barrier,
};

std::string_view to_string(OpKind k);

struct ScriptOp {
  OpKind kind = OpKind::Barrier;
  Position tile;          // WriteReg / ReadReg / WaitIrq
  Addr reg_offset = 0;    // WriteReg / ReadReg
  Word value = 0;         // WriteReg / Store / alloc constant init
  AddrRef addr;           // Load / Store
  std::string name;       // EspAlloc / EspFree / EspRun label
  std::uint64_t bytes = 0;
  std::optional<int> partition;
  BufferInit init = BufferInit::None;
  std::vector<InvocationSpec> invocations;
  bool flush_protocol = true;  // EspRun: false skips the driver flush sequence

  bool operator==(const ScriptOp&) const = default;
};

struct ProcessorScript {
  Position processor;
  std::vector<ScriptOp> ops;

  bool operator==(const ProcessorScript&) const = default;
};

struct WorkloadSpec {
  std::vector<ProcessorScript> scripts;

  bool operator==(const WorkloadSpec&) const = default;
};

struct SimParams {
  Cycle deadlock_window = 10'000;
  Cycle monitor_interval = 0;  // 0 disables periodic monitor snapshots

  bool operator==(const SimParams&) const = default;
};

struct SocConfig {
  int rows = 0;
  int cols = 0;
  std::vector<TileSpec> tiles;  // row-major
  NocParams noc;
  CacheParams cache;
  DramParams dram;
  std::map<std::string, AcceleratorParams> accelerators;
  WorkloadSpec workload;
  SimParams sim;
  std::uint64_t seed = 1;

  bool operator==(const SocConfig&) const = default;
};

/// Thrown by parse_config for schema violations (unknown keys, bad types).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SocConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const SocConfig& cfg);

// ---------------------------------------------------------------------------
// Validation and elaboration
// ---------------------------------------------------------------------------

enum class ConfigErrorCode : std::uint8_t {
  GridMismatch,
  NoAuxTile,
  MultipleAuxTiles,
  NoProcessorTile,
  MemoryTileCountOutOfRange,
  UnknownAcceleratorRef,
  CoherenceModeMismatch,
  BadAcceleratorParams,
  BadNocParams,
  BadCacheParams,
  BadDramParams,
  BadWorkload,
  GranularityMismatch,
  AllocExhausted,
  IndivisibleDramSize,
};

std::string_view to_string(ConfigErrorCode c);

struct Violation {
  ConfigErrorCode code;
  std::string message;
};

struct ValidationResult;

class ValidatedSoC {
 public:
  const SocConfig& config() const { return cfg_; }
  int rows() const { return cfg_.rows; }
  int cols() const { return cfg_.cols; }
  int num_tiles() const { return cfg_.rows * cfg_.cols; }
  const TileSpec& tile(TileId id) const { return cfg_.tiles.at(id); }
  TileId id_of(Position p) const { return static_cast<TileId>(p.row * cfg_.cols + p.col); }
  Position position_of(TileId id) const { return {id / cfg_.cols, id % cfg_.cols}; }
  bool contains(Position p) const {
    return p.row >= 0 && p.col >= 0 && p.row < cfg_.rows && p.col < cfg_.cols;
  }
  std::vector<TileId> tiles_of_kind(TileKind k) const;
  TileId aux_tile() const { return tiles_of_kind(TileKind::Auxiliary).front(); }

 private:
  friend ValidationResult validate_config(const SocConfig& raw);
  explicit ValidatedSoC(SocConfig cfg) : cfg_(std::move(cfg)) {}
  SocConfig cfg_;
};

struct ValidationResult {
  std::optional<ValidatedSoC> soc;
  std::vector<Violation> violations;

  bool ok() const { return soc.has_value(); }
  bool has(ConfigErrorCode c) const;
};

/// Checks every constraint and reports all violations, not only the first.
ValidationResult validate_config(const SocConfig& raw);

inline constexpr std::uint64_t kApertureBytes = 64 * 1024;

struct Partition {
  TileId tile = 0;
  Addr base = 0;
  std::uint64_t size = 0;

  bool contains(Addr a) const { return a >= base && a - base < size; }
  bool operator==(const Partition&) const = default;
};

struct Aperture {
  Addr base = 0;
  std::uint64_t size = 0;

  bool contains(Addr a) const { return a >= base && a - base < size; }
  bool operator==(const Aperture&) const = default;
};

struct MemoryMap {
  Addr dram_base = 0;
  std::uint64_t dram_size = 0;
  std::vector<Partition> partitions;           // row-major memory-tile order
  std::map<TileId, Aperture> register_apertures;

  const Partition* partition_for(Addr a) const;
  std::optional<TileId> aperture_owner(Addr a) const;
  std::optional<std::size_t> partition_index(TileId memory_tile) const;
};

class MemoryMapError : public std::runtime_error {
 public:
  explicit MemoryMapError(ConfigErrorCode c, const std::string& what)
      : std::runtime_error(what), code(c) {}
  ConfigErrorCode code;
};

/// Equal contiguous split of DRAM across memory tiles plus 64 KiB register
/// apertures below the DRAM base. Throws MemoryMapError(IndivisibleDramSize).
MemoryMap build_memory_map(const ValidatedSoC& soc);

/// Bump allocator over the DRAM partitions. Buffers go to the requested
/// partition, or else to the partition with the most free space (lowest
/// index on ties). Freed buffers are not reclaimed.
class BufferAllocator {
 public:
  BufferAllocator(const MemoryMap& map, std::uint64_t align);
  std::optional<Addr> allocate(std::uint64_t bytes, std::optional<int> partition = std::nullopt);
  std::uint64_t free_bytes(std::size_t partition) const;

 private:
  std::vector<Partition> parts_;
  std::vector<Addr> next_;
  std::uint64_t align_;
};

/// X-then-Y next hop from `current` toward `dst`.
Port route_xy(Position current, Position dst);

inline Position neighbor(Position p, Port port) {
  switch (port) {
    case Port::North: return {p.row - 1, p.col};
    case Port::South: return {p.row + 1, p.col};
    case Port::East: return {p.row, p.col + 1};
    case Port::West: return {p.row, p.col - 1};
    case Port::Local: return p;
  }
  return p;
}

class RoutingTables {
 public:
  RoutingTables(int rows, int cols, std::vector<Port> table)
      : rows_(rows), cols_(cols), table_(std::move(table)) {}
  /// Tables for a bare rows x cols mesh.
  static RoutingTables xy(int rows, int cols);

  Port lookup(Position router, Position dst) const {
    const int n = rows_ * cols_;
    return table_[static_cast<std::size_t>((router.row * cols_ + router.col) * n + dst.row * cols_ + dst.col)];
  }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  int rows_;
  int cols_;
  std::vector<Port> table_;
};

RoutingTables build_routing_tables(const ValidatedSoC& soc);

/// Fixed class-to-plane assignment: request/forward/response on 1..3,
/// DMA request on 4, IO/IRQ on 5, DMA response on 6.
PlaneId plane_for_message(MessageClass c);

/// Per-run plane assignment. Defaults to plane_for_message; the test hook
/// collapses the coherence classes onto plane 1.
class PlaneMap {
 public:
  PlaneMap();
  static PlaneMap single_coherence_plane();
  static PlaneMap for_config(const NocParams& p) {
    return p.single_coherence_plane ? single_coherence_plane() : PlaneMap{};
  }
  PlaneId plane(MessageClass c) const { return planes_[static_cast<std::size_t>(c)]; }

 private:
  std::array<PlaneId, kNumMessageClasses> planes_{};
};

}  // namespace espsim
