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

#include <algorithm>
#include <map>
#include <random>

#include "espsim/accelerator.hpp"

namespace espsim {
namespace {

AcceleratorParams params(int burst, int bursts, int compute) {
  AcceleratorParams p;
  p.id = "acc";
  p.burst_len_words = burst;
  p.num_bursts = bursts;
  p.compute_cycles_per_burst = compute;
  p.plm_words = 2 * burst;
  return p;
}

void configure(Accelerator& a, Addr src, Addr dst, Cycle now, TileId owner = 0) {
  a.write_register(kRegSrc, src, now);
  a.write_register(kRegDst, dst, now);
  a.write_register(kRegIrqOwner, owner, now);
}

std::vector<const TimelineEvent*> events(const Accelerator& a, AccEvent e) {
  std::vector<const TimelineEvent*> out;
  for (const auto& t : a.timeline())
    if (t.event == e) out.push_back(&t);
  return out;
}

// Drives one accelerator against an idealized memory: a load takes `l`
// cycles, a store `s` cycles, with no queueing.
struct Bench {
  Accelerator acc;
  Cycle l;
  Cycle s;
  std::map<Addr, Word> mem;
  std::multimap<Cycle, AccRequest> due;
  Cycle now = 0;
  std::mt19937_64 jitter{7};
  int jitter_max = 0;  // extra random latency per request

  Bench(AcceleratorParams p, Cycle load, Cycle store) : acc(1, "acc", std::move(p)), l(load), s(store) {}

  Cycle extra() {
    if (jitter_max == 0) return 0;
    return std::uniform_int_distribution<Cycle>(0, static_cast<Cycle>(jitter_max))(jitter);
  }

  void cycle() {
    auto [lo, hi] = due.equal_range(now);
    for (auto it = lo; it != hi; ++it) {
      const AccRequest& r = it->second;
      if (r.kind == AccRequest::Kind::Read) {
        std::vector<Word> data(r.words);
        for (std::uint32_t i = 0; i < r.words; ++i) data[i] = mem[r.addr + i * kWordBytes];
        acc.load_data(r.tag, data, now);
      } else {
        for (std::size_t i = 0; i < r.data.size(); ++i) mem[r.addr + i * kWordBytes] = r.data[i];
        acc.store_ack(r.tag, now);
      }
    }
    due.erase(lo, hi);
    acc.step(now);
    for (auto& r : acc.requests()) {
      const Cycle lat = (r.kind == AccRequest::Kind::Read ? l : s) + extra();
      due.emplace(now + lat, std::move(r));
    }
    acc.requests().clear();
    ++now;
  }

  // Starts at the current cycle and runs to the interrupt. Returns the
  // cycle of the IRQ event measured from the start write.
  Cycle run(Addr src, Addr dst) {
    const Cycle start = now;
    configure(acc, src, dst, now);
    acc.write_register(kRegCmd, 1, now);
    ++now;
    for (int guard = 0; guard < 1'000'000; ++guard) {
      cycle();
      if (auto owner = acc.take_irq()) return now - 1 - start;
    }
    ADD_FAILURE() << "accelerator never finished";
    return 0;
  }
};

TEST(Accelerator, StartIssuesFirstLoadNextCycle) {
  Accelerator a(3, "acc", params(16, 4, 10));
  configure(a, 0x1000, 0x2000, 5);
  EXPECT_EQ(a.phase(), AccPhase::Config);
  a.write_register(kRegCmd, 1, 5);
  EXPECT_EQ(a.phase(), AccPhase::Running);
  a.step(5);
  EXPECT_TRUE(a.requests().empty());
  a.step(6);
  ASSERT_EQ(a.requests().size(), 1U);
  EXPECT_EQ(a.requests()[0].kind, AccRequest::Kind::Read);
  EXPECT_EQ(a.requests()[0].addr, 0x1000U);
  EXPECT_EQ(a.requests()[0].words, 16U);
  ASSERT_EQ(events(a, AccEvent::LoadIssue).size(), 1U);
  EXPECT_EQ(events(a, AccEvent::LoadIssue)[0]->cycle, 6U);
  EXPECT_EQ(events(a, AccEvent::Cfg)[0]->cycle, 5U);
}

TEST(Accelerator, StartWithoutRegistersIsAnErrorEvent) {
  Accelerator a(3, "acc", params(16, 4, 10));
  a.write_register(kRegSrc, 0x1000, 0);
  a.write_register(kRegCmd, 1, 1);
  EXPECT_NE(a.phase(), AccPhase::Running);
  ASSERT_EQ(events(a, AccEvent::Error).size(), 1U);
  EXPECT_EQ(events(a, AccEvent::Error)[0]->detail, "StartWhileUnconfigured");
  EXPECT_EQ(a.errors(), 1U);
}

TEST(Accelerator, RegisterErrors) {
  Accelerator a(3, "acc", params(16, 4, 10));
  a.write_register(0x48, 1, 0);
  a.write_register(0x0c, 1, 0);
  a.write_register(kRegStatus, 1, 0);
  a.write_register(kRegMode, 9, 0);
  configure(a, 0x1000, 0x2000, 0);
  a.write_register(kRegCmd, 1, 1);
  a.write_register(kRegCmd, 1, 2);
  a.write_register(kRegSrc, 0x3000, 2);
  std::vector<std::string> details;
  for (const auto* e : events(a, AccEvent::Error)) details.push_back(e->detail.substr(0, e->detail.find(' ')));
  EXPECT_EQ(details, (std::vector<std::string>{"BadRegisterOffset", "BadRegisterOffset", "BadRegisterOffset",
                                               "BadCoherenceMode", "StartWhileRunning", "RegisterWriteWhileRunning"}));
  EXPECT_EQ(*a.read_register(kRegSrc), 0x1000U);
  EXPECT_EQ(*a.read_register(kRegStatus), static_cast<Word>(AccPhase::Running));
  EXPECT_FALSE(a.read_register(0x40).has_value());
}

TEST(Accelerator, RejectsPlmSmallerThanTwoBursts) {
  auto p = params(16, 4, 10);
  p.plm_words = 31;
  EXPECT_THROW(Accelerator(0, "acc", p), SimError);
}

TEST(Accelerator, SingleBurstCostsExactlyLoadComputeStore) {
  Bench b(params(16, 1, 37), 23, 11);
  // One cycle separates the start write from the first load.
  EXPECT_EQ(b.run(0x1000, 0x2000), 1U + 23 + 37 + 11);
}

// Per-burst l, c, s in a 3x3 grid of ratios: the idealized pipeline matches
// t0 + l + c + s + (n - 1) * max(l, c, s) exactly.
TEST(Accelerator, IdealPipelineMatchesClosedForm) {
  const int n = 8;
  for (Cycle l : {20U, 60U, 120U}) {
    for (Cycle c : {20U, 60U, 120U}) {
      for (Cycle s : {25U, 70U}) {
        Bench b(params(16, n, static_cast<int>(c)), l, s);
        const Cycle expect = 1 + l + c + s + (n - 1) * std::max({l, c, s});
        EXPECT_EQ(b.run(0, 0x10000), expect) << "l=" << l << " c=" << c << " s=" << s;
      }
    }
  }
}

TEST(Accelerator, CopyThroughAndTransform) {
  auto p = params(8, 4, 5);
  p.transform = Transform::AddConst;
  p.transform_arg = 10;
  Bench b(p, 4, 4);
  for (Addr i = 0; i < 32; ++i) b.mem[0x100 + i * 8] = i * 3;
  b.run(0x100, 0x1000);
  for (Addr i = 0; i < 32; ++i) EXPECT_EQ(b.mem[0x1000 + i * 8], i * 3 + 10);
  EXPECT_EQ(b.acc.phase(), AccPhase::Done);
  EXPECT_EQ(*b.acc.read_register(kRegStatus), static_cast<Word>(AccPhase::Done));
}

TEST(Accelerator, WorkConservationWithOutputRatio) {
  for (auto [num, den] : {std::pair{1, 2}, std::pair{1, 1}, std::pair{2, 1}}) {
    auto p = params(16, 5, 7);
    p.batches = 2;
    p.output_num = num;
    p.output_den = den;
    Bench b(p, 9, 9);
    b.run(0, 0x100000);
    EXPECT_EQ(b.acc.words_loaded(), 16U * 5 * 2);
    EXPECT_EQ(b.acc.words_stored(), 16U * 5 * 2 * num / den);
    EXPECT_EQ(events(b.acc, AccEvent::StoreDone).size(), 10U);
  }
}

TEST(Accelerator, ComputeBoundStallsTheLoadEngine) {
  Bench b(params(16, 8, 200), 10, 10);
  b.run(0, 0x10000);
  EXPECT_GT(b.acc.load_stall_cycles(), 0U);
}

// Ping-pong safety under random latencies: a half is reloaded only after
// compute consumed it, and recomputed only after its store completed.
TEST(Accelerator, PingPongHalvesNeverOverlap) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937 rng(static_cast<unsigned>(seed));
    const int n = 3 + static_cast<int>(rng() % 10);
    Bench b(params(8, n, 1 + static_cast<int>(rng() % 80)), 1 + rng() % 60, 1 + rng() % 60);
    b.jitter.seed(static_cast<unsigned>(seed));
    b.jitter_max = 40;
    b.run(0, 0x10000);
    std::map<std::pair<AccEvent, std::string>, Cycle> at;
    for (const auto& e : b.acc.timeline()) at[{e.event, e.detail}] = e.cycle;
    const auto t = [&](AccEvent e, int k) { return at.at({e, "burst=" + std::to_string(k)}); };
    for (int k = 0; k < n; ++k) {
      EXPECT_LE(t(AccEvent::LoadDone, k), t(AccEvent::ComputeStart, k));
      EXPECT_LE(t(AccEvent::ComputeDone, k), t(AccEvent::StoreIssue, k));
      if (k + 2 < n) {
        EXPECT_GE(t(AccEvent::LoadIssue, k + 2), t(AccEvent::ComputeDone, k)) << "seed " << seed;
        EXPECT_GE(t(AccEvent::ComputeStart, k + 2), t(AccEvent::StoreDone, k)) << "seed " << seed;
      }
      if (k + 1 < n) {
        EXPECT_GE(t(AccEvent::ComputeStart, k + 1), t(AccEvent::ComputeDone, k));
        EXPECT_GE(t(AccEvent::LoadIssue, k + 1), t(AccEvent::LoadDone, k));
        EXPECT_GE(t(AccEvent::StoreIssue, k + 1), t(AccEvent::StoreDone, k));
      }
    }
  }
}

TEST(Accelerator, SecondInvocationRestartsCleanly) {
  Bench b(params(8, 3, 5), 4, 4);
  const Cycle first = b.run(0, 0x1000);
  const Cycle second = b.run(0, 0x2000);
  EXPECT_EQ(first, second);
  EXPECT_EQ(b.acc.invocations(), 2U);
}

// Producer and consumer wired back to back, with the consumer started
// long before the producer: it waits for data, then completes correctly.
TEST(Accelerator, P2PConsumerWaitsForProducer) {
  const TileId ptile = 4;
  const TileId ctile = 7;
  auto pp = params(8, 6, 12);
  auto cp = params(8, 6, 9);
  cp.transform = Transform::AddConst;
  cp.transform_arg = 1;
  Accelerator prod(ptile, "prod", pp);
  Accelerator cons(ctile, "cons", cp);
  std::map<Addr, Word> mem;
  for (Addr i = 0; i < 48; ++i) mem[i * 8] = 100 + i;

  cons.write_register(kRegDst, 0x1000, 0);
  cons.write_register(kRegP2PSrc, ptile + 1, 0);
  cons.write_register(kRegIrqOwner, 0, 0);
  cons.write_register(kRegCmd, 1, 0);

  const Cycle hop = 5;
  std::multimap<Cycle, std::pair<TileId, AccRequest>> due;  // (target, request)
  bool prod_started = false;
  bool cons_done = false;
  bool prod_done = false;
  std::uint64_t credits_seen = 0;
  for (Cycle now = 1; now < 5000 && !(cons_done && prod_done); ++now) {
    if (now == 200) {
      prod.write_register(kRegSrc, 0, now);
      prod.write_register(kRegP2PDst, ctile + 1, now);
      prod.write_register(kRegIrqOwner, 0, now);
      prod.write_register(kRegCmd, 1, now);
      prod_started = true;
    }
    auto [lo, hi] = due.equal_range(now);
    for (auto it = lo; it != hi; ++it) {
      const auto& [target, r] = it->second;
      Accelerator& a = target == ptile ? prod : cons;
      switch (r.kind) {
        case AccRequest::Kind::Read: {
          std::vector<Word> d(r.words);
          for (std::uint32_t i = 0; i < r.words; ++i) d[i] = mem[r.addr + i * 8];
          a.load_data(r.tag, d, now);
          break;
        }
        case AccRequest::Kind::Write:
          for (std::size_t i = 0; i < r.data.size(); ++i) mem[r.addr + i * 8] = r.data[i];
          a.store_ack(r.tag, now);
          break;
        case AccRequest::Kind::P2PCredit:
          ++credits_seen;
          prod.p2p_credit(ctile, r.words, now);
          break;
        case AccRequest::Kind::P2PSend:
          cons.load_data(static_cast<std::uint64_t>(cons.words_loaded() / 8), r.data, now);
          break;
      }
    }
    due.erase(lo, hi);
    prod.step(now);
    cons.step(now);
    for (auto& r : prod.requests()) {
      if (r.kind == AccRequest::Kind::P2PSend) {
        prod.store_ack(r.tag, now);  // acknowledged once it leaves
        due.emplace(now + hop, std::pair{ctile, r});
      } else {
        due.emplace(now + hop, std::pair{ptile, r});
      }
    }
    prod.requests().clear();
    for (auto& r : cons.requests()) {
      ASSERT_NE(r.kind, AccRequest::Kind::Read) << "bound consumer must not read memory";
      due.emplace(now + hop, std::pair{r.kind == AccRequest::Kind::P2PCredit ? ptile : ctile, r});
    }
    cons.requests().clear();
    if (cons.take_irq()) cons_done = true;
    if (prod.take_irq()) prod_done = true;
  }
  ASSERT_TRUE(prod_started);
  ASSERT_TRUE(cons_done);
  ASSERT_TRUE(prod_done);
  EXPECT_EQ(credits_seen, 6U);
  for (Addr i = 0; i < 48; ++i) EXPECT_EQ(mem[0x1000 + i * 8], 101 + i);
  EXPECT_GT(events(cons, AccEvent::LoadDone).front()->cycle, 200U);
  EXPECT_EQ(prod.errors() + cons.errors(), 0U);
}

TEST(Accelerator, CreditOfWrongGranularityIsRejected) {
  Accelerator prod(1, "prod", params(8, 2, 3));
  prod.write_register(kRegP2PDst, 3, 0);
  prod.p2p_credit(2, 16, 0);
  prod.p2p_credit(5, 8, 0);
  ASSERT_EQ(events(prod, AccEvent::Error).size(), 2U);
  EXPECT_EQ(events(prod, AccEvent::Error)[0]->detail.rfind("GranularityMismatch", 0), 0U);
  EXPECT_EQ(events(prod, AccEvent::Error)[1]->detail.rfind("UnexpectedP2PCredit", 0), 0U);
}

}  // namespace
}  // namespace espsim
