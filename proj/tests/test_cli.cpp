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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/scenario.hpp"

#ifndef ESPSIM_CLI_PATH
#error "ESPSIM_CLI_PATH must name the built command-line tool"
#endif

namespace espsim::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("espsim-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  RunManifest manifest(const std::string& scenario, const std::string& out) {
    RunManifest m;
    m.config = test::scenario_path(scenario);
    m.out_dir = dir_ / out;
    return m;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

int shell(const std::string& args) {
  const int raw = std::system((std::string(ESPSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

TEST_F(Cli, ValidateBundledTopology) {
  EXPECT_EQ(cmd_validate(test::scenario_path("3x3_two_acc"), out_, err_), kExitOk);
  EXPECT_EQ(err_.str(), "");
}

TEST_F(Cli, ValidateNamesBothAuxPositions) {
  json d = test::load_scenario("3x3_two_acc");
  d["tiles"][8] = "aux";
  EXPECT_EQ(cmd_validate(write("two_aux.json", d.dump()), out_, err_), kExitInvalid);
  EXPECT_NE(err_.str().find("(0,0)"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("(2,2)"), std::string::npos) << err_.str();
}

TEST_F(Cli, ValidateReportsEveryViolation) {
  json d = test::load_scenario("3x3_two_acc");
  d["tiles"][8] = "aux";
  d["tiles"][1] = "empty";
  EXPECT_EQ(cmd_validate(write("bad.json", d.dump()), out_, err_), kExitInvalid);
  EXPECT_NE(err_.str().find("MultipleAuxTiles"), std::string::npos);
  EXPECT_NE(err_.str().find("NoProcessorTile"), std::string::npos);
}

TEST_F(Cli, MalformedAndMissingFilesAreIoErrors) {
  EXPECT_EQ(cmd_validate(write("broken.json", "{\"grid\": "), out_, err_), kExitIo);
  EXPECT_EQ(cmd_validate(dir_ / "absent.json", out_, err_), kExitIo);
}

TEST_F(Cli, UnknownKeyIsInvalid) {
  json d = test::load_scenario("3x3_two_acc");
  d["grid"]["depth"] = 2;
  EXPECT_EQ(cmd_validate(write("unknown.json", d.dump()), out_, err_), kExitInvalid);
  EXPECT_NE(err_.str().find("depth"), std::string::npos);
}

TEST_F(Cli, RunWritesStatsAndTimeline) {
  RunManifest m = manifest("fig6_memory_pipeline", "run");
  m.trace = TraceLevel::Timeline;
  ASSERT_EQ(cmd_run(m, out_, err_), kExitOk) << err_.str();
  const Stats s = stats_from_json(json::parse(slurp(m.out_dir / "stats.json")));
  EXPECT_EQ(s.status, "quiescent");
  EXPECT_GT(s.makespan, 0U);
  const std::string csv = slurp(m.out_dir / "timeline.csv");
  EXPECT_EQ(csv.rfind("cycle,entity,event,detail\n", 0), 0U);
  EXPECT_FALSE(fs::exists(m.out_dir / "trace.log"));
  for (const auto& e : fs::directory_iterator(m.out_dir)) EXPECT_NE(e.path().extension(), ".tmp");

  // Consumer CFG after producer IRQ, read back from the file.
  std::istringstream lines(csv);
  std::string line;
  std::uint64_t producer_irq = 0;
  std::uint64_t consumer_cfg = 0;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    const auto c = std::stoull(line.substr(0, line.find(',')));
    if (producer_irq == 0 && line.find(",acc@0.2,IRQ,") != std::string::npos) producer_irq = c;
    if (consumer_cfg == 0 && line.find(",acc@1.2,CFG,") != std::string::npos) consumer_cfg = c;
  }
  ASSERT_GT(producer_irq, 0U);
  EXPECT_GT(consumer_cfg, producer_irq);
}

TEST_F(Cli, SummaryLevelWritesOnlyStats) {
  RunManifest m = manifest("3x3_two_acc", "summary");
  ASSERT_EQ(cmd_run(m, out_, err_), kExitOk);
  EXPECT_TRUE(fs::exists(m.out_dir / "stats.json"));
  EXPECT_FALSE(fs::exists(m.out_dir / "timeline.csv"));
}

TEST_F(Cli, FullLevelWritesTraceLog) {
  RunManifest m = manifest("3x3_two_acc", "full");
  m.trace = TraceLevel::Full;
  ASSERT_EQ(cmd_run(m, out_, err_), kExitOk);
  const std::string log = slurp(m.out_dir / "trace.log");
  EXPECT_EQ(log.rfind("cycle,entity,event,detail\n", 0), 0U);
  EXPECT_NE(log.find(",FLIT,"), std::string::npos);
  EXPECT_NE(log.find(",TRANSITION,"), std::string::npos);
  EXPECT_TRUE(fs::exists(m.out_dir / "timeline.csv"));
}

TEST_F(Cli, P2PBeatsContended) {
  RunManifest p = manifest("fig6_p2p", "p2p");
  RunManifest c = manifest("fig6_contended", "contended");
  ASSERT_EQ(cmd_run(p, out_, err_), kExitOk);
  ASSERT_EQ(cmd_run(c, out_, err_), kExitOk);
  const Stats sp = stats_from_json(json::parse(slurp(p.out_dir / "stats.json")));
  const Stats sc = stats_from_json(json::parse(slurp(c.out_dir / "stats.json")));
  EXPECT_LT(sp.makespan, sc.makespan);
}

TEST_F(Cli, DeadlockExitsThree) {
  RunManifest m = manifest("deadlock_single_plane", "dl");
  EXPECT_EQ(cmd_run(m, out_, err_), kExitDeadlock);
  EXPECT_NE(err_.str().find("deadlock"), std::string::npos);
  EXPECT_EQ(stats_from_json(json::parse(slurp(m.out_dir / "stats.json"))).status, "deadlock");
}

TEST_F(Cli, MaxCyclesHasItsOwnExitCode) {
  RunManifest m = manifest("fig6_memory_pipeline", "cap");
  m.max_cycles = 100;
  EXPECT_EQ(cmd_run(m, out_, err_), kExitMaxCycles);
}

TEST_F(Cli, SeedOverrideChangesRandomData) {
  RunManifest a = manifest("fig6_memory_pipeline", "a");
  RunManifest b = manifest("fig6_memory_pipeline", "b");
  a.trace = b.trace = TraceLevel::Timeline;
  b.seed = 12345;
  ASSERT_EQ(cmd_run(a, out_, err_), kExitOk);
  ASSERT_EQ(cmd_run(b, out_, err_), kExitOk);
  EXPECT_NE(slurp(a.out_dir / "timeline.csv"), slurp(b.out_dir / "timeline.csv"));
  EXPECT_EQ(slurp(a.out_dir / "stats.json"), slurp(b.out_dir / "stats.json"));
}

TEST_F(Cli, OutputsAreByteStable) {
  for (const char* name : {"3x3_two_acc", "fig6_p2p"}) {
    RunManifest a = manifest(name, std::string(name) + "-1");
    RunManifest b = manifest(name, std::string(name) + "-2");
    a.trace = b.trace = TraceLevel::Full;
    ASSERT_EQ(cmd_run(a, out_, err_), kExitOk);
    ASSERT_EQ(cmd_run(b, out_, err_), kExitOk);
    for (const char* file : {"stats.json", "timeline.csv", "trace.log"})
      EXPECT_EQ(slurp(a.out_dir / file), slurp(b.out_dir / file)) << name << " " << file;
  }
}

TEST_F(Cli, ParseAxis) {
  const SweepAxis a = parse_axis("dram.latency_cycles=10,20,30");
  EXPECT_EQ(a.key, "dram.latency_cycles");
  EXPECT_EQ(a.values, (std::vector<json>{10, 20, 30}));
  EXPECT_EQ(parse_axis("tiles.4=mem,empty").values, (std::vector<json>{"mem", "empty"}));
  EXPECT_EQ(parse_axis("noc.single_coherence_plane=true").values, (std::vector<json>{true}));
  EXPECT_THROW(parse_axis("seed="), std::invalid_argument);
  EXPECT_THROW(parse_axis("seed"), std::invalid_argument);
  EXPECT_THROW(parse_axis("=1,2"), std::invalid_argument);
}

TEST_F(Cli, ApplyOverride) {
  json d = {{"a", {{"b", 1}}}, {"t", {"x", "y"}}};
  apply_override(d, "a.b", 5);
  apply_override(d, "t.1", "z");
  apply_override(d, "n.m", true);
  EXPECT_EQ(d, (json{{"a", {{"b", 5}}}, {"t", {"x", "z"}}, {"n", {{"m", true}}}}));
  EXPECT_THROW(apply_override(d, "t.7", 1), std::invalid_argument);
  EXPECT_THROW(apply_override(d, "a.b.c", 1), std::invalid_argument);
  EXPECT_THROW(apply_override(d, "t.x", 1), std::invalid_argument);
}

TEST_F(Cli, SweepMemoryTiles) {
  RunManifest m = manifest("fig6_contended", "sweep");
  m.axes = {parse_axis("tiles.4=empty,mem")};
  m.jobs = 2;
  ASSERT_EQ(cmd_sweep(m, out_, err_), kExitOk) << err_.str();
  const json index = json::parse(slurp(m.out_dir / "index.json"));
  ASSERT_EQ(index["points"].size(), 2U);
  std::vector<Cycle> makespan;
  for (const auto& p : index["points"]) {
    const Stats s = stats_from_json(json::parse(slurp(m.out_dir / p["stats"].get<std::string>())));
    makespan.push_back(s.makespan);
    EXPECT_EQ(p["makespan"].get<Cycle>(), s.makespan);
  }
  EXPECT_EQ(index["points"][1]["params"]["tiles.4"], "mem");
  EXPECT_LE(makespan[1], makespan[0]);
}

TEST_F(Cli, SweepComputeIsMonotone) {
  RunManifest m = manifest("fig6_memory_pipeline", "compute");
  m.axes = {parse_axis("accelerators.producer.compute_cycles_per_burst=10,100,170,400"),
            parse_axis("accelerators.consumer.compute_cycles_per_burst=170")};
  m.jobs = 3;
  ASSERT_EQ(cmd_sweep(m, out_, err_), kExitOk);
  const json index = json::parse(slurp(m.out_dir / "index.json"));
  ASSERT_EQ(index["points"].size(), 4U);
  for (std::size_t i = 1; i < 4; ++i)
    EXPECT_LE(index["points"][i - 1]["makespan"].get<Cycle>(), index["points"][i]["makespan"].get<Cycle>());
}

TEST_F(Cli, SweepIndependentOfJobCount) {
  RunManifest a = manifest("fig6_memory_pipeline", "serial");
  RunManifest b = manifest("fig6_memory_pipeline", "parallel");
  a.axes = b.axes = {parse_axis("dram.latency_cycles=10,30"), parse_axis("seed=1,2")};
  a.jobs = 1;
  b.jobs = 4;
  ASSERT_EQ(cmd_sweep(a, out_, err_), kExitOk);
  ASSERT_EQ(cmd_sweep(b, out_, err_), kExitOk);
  EXPECT_EQ(slurp(a.out_dir / "index.json"), slurp(b.out_dir / "index.json"));
  for (int i = 0; i < 4; ++i) {
    const std::string p = "point-000" + std::to_string(i) + "/stats.json";
    EXPECT_EQ(slurp(a.out_dir / p), slurp(b.out_dir / p));
  }
}

TEST_F(Cli, SweepUsageAndKeyErrors) {
  RunManifest m = manifest("fig6_memory_pipeline", "bad");
  EXPECT_EQ(cmd_sweep(m, out_, err_), kExitIo);  // no axis
  m.axes = {SweepAxis{"seed", {}}};
  EXPECT_EQ(cmd_sweep(m, out_, err_), kExitIo);  // empty axis
  m.axes = {parse_axis("dram.speed=1,2")};
  EXPECT_EQ(cmd_sweep(m, out_, err_), kExitInvalid);
  EXPECT_FALSE(fs::exists(m.out_dir / "index.json"));
}

TEST_F(Cli, SweepReportsPartialFailure) {
  RunManifest m = manifest("fig6_memory_pipeline", "partial");
  // The second point turns a memory tile into a second aux tile.
  m.axes = {parse_axis("tiles.1=mem,aux")};
  EXPECT_EQ(cmd_sweep(m, out_, err_), kExitInvalid);
  const json index = json::parse(slurp(m.out_dir / "index.json"));
  EXPECT_EQ(index["points"][0]["status"], "quiescent");
  EXPECT_EQ(index["points"][1]["status"], "invalid");
  EXPECT_FALSE(index["points"][1].contains("stats"));
  EXPECT_NE(err_.str().find("point-0001"), std::string::npos);
}

TEST_F(Cli, BinaryExitCodes) {
  EXPECT_EQ(shell("validate " + test::scenario_path("3x3_two_acc").string()), kExitOk);
  EXPECT_EQ(shell("validate " + write("broken.json", "[").string()), kExitIo);
  EXPECT_EQ(shell("run " + test::scenario_path("deadlock_single_plane").string() + " --out " + (dir_ / "d").string()),
            kExitDeadlock);
  EXPECT_EQ(shell("run " + test::scenario_path("3x3_two_acc").string() + " --trace loud --out " + (dir_ / "x").string()),
            kExitIo);
  EXPECT_EQ(shell("sweep " + test::scenario_path("3x3_two_acc").string() + " --axis seed= --out " + (dir_ / "s").string()),
            kExitIo);
  EXPECT_EQ(shell("frobnicate"), kExitIo);
  EXPECT_EQ(shell("--help"), 0);
}

}  // namespace
}  // namespace espsim::cli
