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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "espsim/config.hpp"
#include "support/builders.hpp"

namespace espsim {
namespace {

using test::grid_config;

SocConfig fig2_config() {
  return grid_config(3, 3, {"aux", "cpu", "mem", "acc0@coherent-dma", "empty", "acc1@non-coherent-dma", "empty",
                            "empty", "empty"});
}

TEST(ValidateConfig, NineTileGridIsValid) {
  auto r = validate_config(fig2_config());
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.violations.empty());
}

TEST(ValidateConfig, LoneAuxTileLacksProcessor) {
  auto r = validate_config(grid_config(1, 1, {"aux"}));
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(r.has(ConfigErrorCode::NoProcessorTile));
}

TEST(ValidateConfig, FiveMemoryTilesOutOfRange) {
  auto r = validate_config(grid_config(3, 3, {"aux", "cpu", "mem", "mem", "mem", "mem", "mem", "empty", "empty"}));
  EXPECT_TRUE(r.has(ConfigErrorCode::MemoryTileCountOutOfRange));
}

TEST(ValidateConfig, ReportsEveryViolation) {
  // Two aux tiles, no processor, no memory, unknown accelerator model.
  auto cfg = grid_config(2, 2, {"aux", "aux", "empty", "empty"});
  cfg.tiles[2].kind = TileKind::Accelerator;
  cfg.tiles[2].accelerator = "missing";
  cfg.tiles[2].coherence_mode = CoherenceMode::CoherentDMA;
  auto r = validate_config(cfg);
  EXPECT_TRUE(r.has(ConfigErrorCode::MultipleAuxTiles));
  EXPECT_TRUE(r.has(ConfigErrorCode::NoProcessorTile));
  EXPECT_TRUE(r.has(ConfigErrorCode::MemoryTileCountOutOfRange));
  EXPECT_TRUE(r.has(ConfigErrorCode::UnknownAcceleratorRef));
  for (const auto& v : r.violations) {
    if (v.code == ConfigErrorCode::MultipleAuxTiles) {
      EXPECT_NE(v.message.find("(0,0)"), std::string::npos);
      EXPECT_NE(v.message.find("(0,1)"), std::string::npos);
    }
  }
}

TEST(ValidateConfig, GridMismatch) {
  auto cfg = fig2_config();
  cfg.tiles.pop_back();
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::GridMismatch));
}

TEST(ValidateConfig, NoAuxTile) {
  EXPECT_TRUE(validate_config(grid_config(1, 2, {"cpu", "mem"})).has(ConfigErrorCode::NoAuxTile));
}

TEST(ValidateConfig, CoherenceModeOnlyOnAccelerators) {
  auto cfg = fig2_config();
  cfg.tiles[1].coherence_mode = CoherenceMode::FullyCoherent;
  cfg.tiles[3].coherence_mode.reset();
  auto r = validate_config(cfg);
  int count = 0;
  for (const auto& v : r.violations) count += v.code == ConfigErrorCode::CoherenceModeMismatch;
  EXPECT_EQ(count, 2);
}

TEST(ValidateConfig, PlmMustHoldTwoBursts) {
  auto cfg = fig2_config();
  cfg.accelerators["acc0"].plm_words = 31;
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::BadAcceleratorParams));
}

TEST(ValidateConfig, TooFewPlanes) {
  auto cfg = fig2_config();
  cfg.noc.planes = 5;
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::BadNocParams));
}

TEST(ValidateConfig, Idempotent) {
  auto first = validate_config(fig2_config());
  ASSERT_TRUE(first.ok());
  auto second = validate_config(first.soc->config());
  ASSERT_TRUE(second.ok());
  EXPECT_EQ(first.soc->config(), second.soc->config());

  auto bad = grid_config(1, 1, {"aux"});
  auto b1 = validate_config(bad);
  auto b2 = validate_config(bad);
  ASSERT_EQ(b1.violations.size(), b2.violations.size());
  for (std::size_t i = 0; i < b1.violations.size(); ++i) EXPECT_EQ(b1.violations[i].code, b2.violations[i].code);
}

TEST(ValidateConfig, WorkloadChecks) {
  auto cfg = fig2_config();
  ScriptOp alloc;
  alloc.kind = OpKind::EspAlloc;
  alloc.name = "in";
  alloc.bytes = 4096;
  ScriptOp run;
  run.kind = OpKind::EspRun;
  InvocationSpec inv;
  inv.name = "a";
  inv.accelerator = {1, 0};
  inv.src = "in";
  inv.dst = "nowhere";
  run.invocations.push_back(inv);
  cfg.workload.scripts.push_back({{0, 1}, {alloc, run}});
  auto r = validate_config(cfg);
  EXPECT_TRUE(r.has(ConfigErrorCode::BadWorkload));

  cfg.workload.scripts[0].ops[1].invocations[0].dst = "in";
  EXPECT_TRUE(validate_config(cfg).ok());

  // Script on a non-processor tile.
  cfg.workload.scripts[0].processor = {0, 2};
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::BadWorkload));
}

TEST(ValidateConfig, P2PGranularityMismatch) {
  auto cfg = fig2_config();
  cfg.accelerators["acc1"].burst_len_words = 8;
  cfg.accelerators["acc1"].plm_words = 16;
  ScriptOp a1{.kind = OpKind::EspAlloc, .name = "in", .bytes = 4096};
  ScriptOp a2{.kind = OpKind::EspAlloc, .name = "out", .bytes = 4096};
  ScriptOp run{.kind = OpKind::EspRun};
  run.invocations.push_back({.name = "p", .accelerator = {1, 0}, .src = "in"});
  run.invocations.push_back({.name = "c", .accelerator = {1, 2}, .dst = "out", .p2p_from = "p"});
  cfg.workload.scripts.push_back({{0, 1}, {a1, a2, run}});
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::GranularityMismatch));
}

TEST(ValidateConfig, AllocBeyondDram) {
  auto cfg = fig2_config();
  cfg.dram.size = 1 << 20;
  ScriptOp a{.kind = OpKind::EspAlloc, .name = "huge", .bytes = 2 << 20};
  cfg.workload.scripts.push_back({{0, 1}, {a}});
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::AllocExhausted));
}

TEST(ValidateConfig, DependencyCycle) {
  auto cfg = fig2_config();
  ScriptOp a{.kind = OpKind::EspAlloc, .name = "b", .bytes = 4096};
  ScriptOp run{.kind = OpKind::EspRun};
  run.invocations.push_back({.name = "x", .accelerator = {1, 0}, .src = "b", .dst = "b", .after = {"y"}});
  run.invocations.push_back({.name = "y", .accelerator = {1, 2}, .src = "b", .dst = "b", .after = {"x"}});
  cfg.workload.scripts.push_back({{0, 1}, {a, run}});
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::BadWorkload));
}

// ---------------------------------------------------------------------------
// Memory map
// ---------------------------------------------------------------------------

SocConfig with_memories(int n) {
  std::vector<std::string> tiles = {"aux", "cpu"};
  for (int i = 0; i < n; ++i) tiles.push_back("mem");
  while (tiles.size() < 9) tiles.push_back("empty");
  return grid_config(3, 3, tiles);
}

// Brute-force coverage: every page of DRAM maps to exactly one partition.
void expect_partition_property(const MemoryMap& m) {
  const std::uint64_t page = 4096;
  for (Addr a = m.dram_base; a < m.dram_base + m.dram_size; a += page) {
    int owners = 0;
    for (const auto& p : m.partitions) owners += p.contains(a) && p.contains(a + page - 1);
    ASSERT_EQ(owners, 1) << "address 0x" << std::hex << a;
  }
  EXPECT_FALSE(m.partition_for(m.dram_base - 1) != nullptr);
  EXPECT_FALSE(m.partition_for(m.dram_base + m.dram_size) != nullptr);
}

TEST(MemoryMap, TwoTilesSplitEvenly) {
  auto cfg = with_memories(2);
  cfg.dram.base = 0x8000'0000;
  cfg.dram.size = 1ULL << 30;
  auto m = build_memory_map(test::must_validate(cfg));
  ASSERT_EQ(m.partitions.size(), 2u);
  EXPECT_EQ(m.partitions[0].base, 0x8000'0000u);
  EXPECT_EQ(m.partitions[1].base, 0xA000'0000u);
  EXPECT_EQ(m.partitions[0].size, 512u << 20);
  EXPECT_EQ(m.partitions[1].size, 512u << 20);
  EXPECT_EQ(m.partitions[0].tile, 2);
  EXPECT_EQ(m.partitions[1].tile, 3);
  expect_partition_property(m);
}

TEST(MemoryMap, SingleTileIsIdentity) {
  auto m = build_memory_map(test::must_validate(with_memories(1)));
  ASSERT_EQ(m.partitions.size(), 1u);
  EXPECT_EQ(m.partitions[0].base, m.dram_base);
  EXPECT_EQ(m.partitions[0].size, m.dram_size);
}

TEST(MemoryMap, FourTilesCoverByBruteForce) {
  auto m = build_memory_map(test::must_validate(with_memories(4)));
  ASSERT_EQ(m.partitions.size(), 4u);
  for (const auto& p : m.partitions) EXPECT_EQ(p.size, 256u << 20);
  expect_partition_property(m);
}

TEST(MemoryMap, IndivisibleSizeRejected) {
  auto cfg = with_memories(3);
  cfg.dram.size = (1ULL << 30) + 64;
  EXPECT_TRUE(validate_config(cfg).has(ConfigErrorCode::IndivisibleDramSize));
}

TEST(MemoryMap, AperturesDisjointAndBelowDram) {
  auto soc = test::must_validate(fig2_config());
  auto m = build_memory_map(soc);
  // One aperture per populated tile.
  EXPECT_EQ(m.register_apertures.size(), 5u);
  std::vector<Aperture> aps;
  for (const auto& [tile, ap] : m.register_apertures) {
    EXPECT_NE(soc.tile(tile).kind, TileKind::Empty);
    EXPECT_LE(ap.base + ap.size, m.dram_base);
    EXPECT_EQ(ap.size, kApertureBytes);
    EXPECT_EQ(m.aperture_owner(ap.base + 8), tile);
    aps.push_back(ap);
  }
  for (std::size_t i = 0; i < aps.size(); ++i) {
    for (std::size_t j = i + 1; j < aps.size(); ++j) {
      EXPECT_TRUE(aps[i].base + aps[i].size <= aps[j].base || aps[j].base + aps[j].size <= aps[i].base);
    }
  }
}

TEST(BufferAllocator, SpreadsAndHonoursHints) {
  auto m = build_memory_map(test::must_validate(with_memories(2)));
  BufferAllocator alloc(m, 64);
  auto a = alloc.allocate(100);
  auto b = alloc.allocate(100);
  auto c = alloc.allocate(64, 0);
  ASSERT_TRUE(a && b && c);
  EXPECT_EQ(*a, m.partitions[0].base);
  EXPECT_EQ(*b, m.partitions[1].base);
  EXPECT_EQ(*c, m.partitions[0].base + 128);
  EXPECT_FALSE(alloc.allocate(m.dram_size));
}

// ---------------------------------------------------------------------------
// Routing tables
// ---------------------------------------------------------------------------

// Independent oracle: walk X until the column matches, then Y.
Port xy_oracle(Position cur, Position dst) {
  if (cur.col != dst.col) return cur.col < dst.col ? Port::East : Port::West;
  if (cur.row != dst.row) return cur.row < dst.row ? Port::South : Port::North;
  return Port::Local;
}

TEST(RoutingTables, SpecExamples) {
  auto tables = build_routing_tables(test::must_validate(fig2_config()));
  EXPECT_EQ(tables.lookup({0, 0}, {0, 2}), Port::East);
  EXPECT_EQ(tables.lookup({0, 0}, {2, 1}), Port::East);
  EXPECT_EQ(tables.lookup({1, 1}, {1, 1}), Port::Local);
  EXPECT_EQ(tables.lookup({2, 0}, {0, 0}), Port::North);
  EXPECT_EQ(tables.lookup({0, 1}, {2, 2}), Port::East);
}

TEST(RoutingTables, AgreesWithXyOracleOnAllPairs) {
  for (int rows : {3, 4}) {
    auto tables = RoutingTables::xy(rows, rows);
    for (int r = 0; r < rows * rows; ++r) {
      for (int d = 0; d < rows * rows; ++d) {
        const Position cur{r / rows, r % rows};
        const Position dst{d / rows, d % rows};
        ASSERT_EQ(tables.lookup(cur, dst), xy_oracle(cur, dst));
      }
    }
  }
}

TEST(RoutingTables, FollowingTablesReachesDestinationInManhattanHops) {
  auto tables = RoutingTables::xy(4, 4);
  for (int s = 0; s < 16; ++s) {
    for (int d = 0; d < 16; ++d) {
      Position cur{s / 4, s % 4};
      const Position dst{d / 4, d % 4};
      int hops = 0;
      while (tables.lookup(cur, dst) != Port::Local) {
        cur = neighbor(cur, tables.lookup(cur, dst));
        ASSERT_LE(++hops, 6);
      }
      EXPECT_EQ(cur, dst);
      EXPECT_EQ(hops, manhattan({s / 4, s % 4}, dst));
    }
  }
}

// The channel dependency graph induced by XY routing has no cycle.
TEST(RoutingTables, ChannelDependencyGraphIsAcyclic) {
  for (int n : {3, 4}) {
    auto tables = RoutingTables::xy(n, n);
    // Channel = (router, output port). Edge c1 -> c2 if some packet holds c1
    // and then requests c2.
    using Channel = std::pair<int, int>;
    std::map<Channel, std::set<Channel>> edges;
    for (int s = 0; s < n * n; ++s) {
      for (int d = 0; d < n * n; ++d) {
        Position cur{s / n, s % n};
        const Position dst{d / n, d % n};
        std::optional<Channel> prev;
        while (true) {
          const Port p = tables.lookup(cur, dst);
          const Channel c{cur.row * n + cur.col, static_cast<int>(p)};
          if (prev) edges[*prev].insert(c);
          if (p == Port::Local) break;
          prev = c;
          cur = neighbor(cur, p);
        }
      }
    }
    std::map<Channel, int> color;
    std::function<bool(const Channel&)> has_cycle = [&](const Channel& c) {
      color[c] = 1;
      for (const auto& nxt : edges[c]) {
        if (color[nxt] == 1) return true;
        if (color[nxt] == 0 && has_cycle(nxt)) return true;
      }
      color[c] = 2;
      return false;
    };
    for (const auto& [c, _] : edges) {
      if (color[c] == 0) ASSERT_FALSE(has_cycle(c));
    }
  }
}

// ---------------------------------------------------------------------------
// Plane assignment
// ---------------------------------------------------------------------------

TEST(PlaneForMessage, FixedAssignment) {
  EXPECT_EQ(plane_for_message(MessageClass::CohReq), 1);
  EXPECT_EQ(plane_for_message(MessageClass::CohFwd), 2);
  EXPECT_EQ(plane_for_message(MessageClass::CohRsp), 3);
  EXPECT_EQ(plane_for_message(MessageClass::DmaReq), 4);
  EXPECT_EQ(plane_for_message(MessageClass::IoIrq), 5);
  EXPECT_EQ(plane_for_message(MessageClass::DmaRsp), 6);
}

TEST(PlaneForMessage, Injective) {
  std::set<PlaneId> seen;
  for (int c = 0; c < kNumMessageClasses; ++c) seen.insert(plane_for_message(static_cast<MessageClass>(c)));
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(kNumMessageClasses));
}

TEST(PlaneForMessage, TestHookCollapsesCoherence) {
  auto m = PlaneMap::single_coherence_plane();
  EXPECT_EQ(m.plane(MessageClass::CohReq), 1);
  EXPECT_EQ(m.plane(MessageClass::CohFwd), 1);
  EXPECT_EQ(m.plane(MessageClass::CohRsp), 1);
  EXPECT_EQ(m.plane(MessageClass::DmaReq), 4);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

TEST(ParseConfig, RoundTripsThroughJson) {
  auto cfg = fig2_config();
  ScriptOp a{.kind = OpKind::EspAlloc, .name = "in", .bytes = 4096, .init = BufferInit::Index};
  ScriptOp s{.kind = OpKind::Store, .value = 7, .addr = {"in", 8}};
  cfg.workload.scripts.push_back({{0, 1}, {a, s}});
  auto again = parse_config(config_to_json(cfg));
  EXPECT_EQ(again, cfg);
}

TEST(ParseConfig, UnknownKeyRejected) {
  auto doc = config_to_json(fig2_config());
  doc["bogus"] = 1;
  EXPECT_THROW(parse_config(doc), ConfigError);
  auto doc2 = config_to_json(fig2_config());
  doc2["noc"]["vcs"] = 2;
  EXPECT_THROW(parse_config(doc2), ConfigError);
}

TEST(ParseConfig, SizesAndHex) {
  auto doc = config_to_json(fig2_config());
  doc["dram"]["base"] = "0x40000000";
  doc["dram"]["size"] = "256MiB";
  auto cfg = parse_config(doc);
  EXPECT_EQ(cfg.dram.base, 0x4000'0000u);
  EXPECT_EQ(cfg.dram.size, 256u << 20);
}

}  // namespace
}  // namespace espsim
