/*
 *    Copyright 2026 The tlpsim Authors
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

#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "tlpsim/engine.hpp"
#include "tlpsim/experiment.hpp"
#include "tlpsim/synthetic.hpp"
#include "tlpsim/workloads.hpp"

using namespace tlpsim;

namespace
{
SimConfig config(VariantName v = VariantName::Baseline, bool prefetch = false)
{
  SimConfig c;
  c.variant = v;
  if (!prefetch) {
    c.prefetch.l1d = L1dPrefetcherKind::None;
    c.prefetch.l2 = L2PrefetcherKind::None;
  }
  return c;
}

TraceRecord load(std::uint64_t vaddr, std::uint16_t gap = 0, std::uint64_t pc = 0x400100)
{
  return {gap, AccessKind::Load, pc, vaddr};
}

std::string csv_of(const SimStats& s)
{
  return to_csv(flatten({"x", "t", "v", "", "", "all", ""}, s));
}

std::vector<TraceRecord> preset(const char* name, std::uint64_t n, std::uint64_t seed = 1) { return generate(workload_preset(name, n, seed)); }

std::vector<TraceRecord> random_trace(std::uint64_t seed, std::size_t n, std::uint64_t lines, std::uint16_t max_gap = 8)
{
  std::mt19937_64 rng(seed);
  std::vector<TraceRecord> t;
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.gap = static_cast<std::uint16_t>(rng() % (max_gap + 1));
    r.kind = rng() % 5 == 0 ? AccessKind::Store : AccessKind::Load;
    r.pc = 0x400000 + (rng() % 32) * 4;
    r.vaddr = (rng() % lines) * 64 + rng() % 64;
    t.push_back(r);
  }
  return t;
}

void check_accounting(const SimStats& s)
{
  EXPECT_EQ(std::accumulate(s.demand_served.begin(), s.demand_served.end(), std::uint64_t{0}), s.loads + s.stores);
  EXPECT_EQ(std::accumulate(s.speculative_location.begin(), s.speculative_location.end(), std::uint64_t{0}), s.speculative_issued);
  EXPECT_LE(s.speculative_useful, s.speculative_location[3]);
  for (const auto* p : {&s.l1d_pf, &s.l2_pf}) {
    EXPECT_EQ(p->emitted, p->dropped + p->issued);
    EXPECT_EQ(p->issued, p->redundant + p->filled);
    EXPECT_LE(p->useful + p->useless, p->filled);
    EXPECT_EQ(std::accumulate(p->filled_from.begin(), p->filled_from.end(), std::uint64_t{0}), p->filled);
    EXPECT_EQ(std::accumulate(p->useful_from.begin(), p->useful_from.end(), std::uint64_t{0}), p->useful);
    EXPECT_EQ(std::accumulate(p->useless_from.begin(), p->useless_from.end(), std::uint64_t{0}), p->useless);
  }
  EXPECT_EQ(s.dram.speculative_reads + s.dram.merged_speculative, s.speculative_issued);
}
} // namespace

TEST(Timeline, SingleColdLoad)
{
  std::vector<TraceRecord> t{load(0x1000)};
  auto s = simulate(t, config());
  EXPECT_EQ(s.load_latency_sum, 4u + 10 + 36 + 72);
  EXPECT_EQ(s.cycles, 122u);
  EXPECT_EQ(s.demand_served[3], 1u);
  EXPECT_EQ(s.dram.demand_reads, 1u);
  EXPECT_EQ(s.speculative_issued, 0u);
}

TEST(Timeline, SpeculativePathWins)
{
  std::vector<TraceRecord> t{load(0x1000)};
  // untrained weights give confidence 0: Hermes issues from the core
  auto h = simulate(t, config(VariantName::Hermes));
  EXPECT_EQ(h.load_latency_sum, 6u + 72);
  EXPECT_EQ(h.speculative_issued, 1u);
  EXPECT_EQ(h.speculative_useful, 1u);
  EXPECT_EQ(h.dram.speculative_reads, 1u);
  EXPECT_EQ(h.dram.demand_reads, 0u); // merged into the speculative read
  // TLP holds the same prediction until the L1D miss is known
  auto t2 = simulate(t, config(VariantName::Tlp));
  EXPECT_EQ(t2.load_latency_sum, 4u + 6 + 72);
  EXPECT_EQ(t2.offchip.l1d_miss_issues, 1u);
}

TEST(Timeline, L1dHitMakesSpeculationWaste)
{
  std::vector<TraceRecord> t{load(0x1000), load(0x1008, 4000)};
  auto b = simulate(t, config());
  EXPECT_EQ(b.load_latency_sum, 122u + 4);
  auto h = simulate(t, config(VariantName::Hermes));
  EXPECT_EQ(h.load_latency_sum, 78u + 4);
  EXPECT_EQ(h.speculative_issued, 2u);
  EXPECT_EQ(h.speculative_location[0], 1u);
  EXPECT_EQ(h.dram.speculative_reads, 2u);
  EXPECT_DOUBLE_EQ(dram_delta(h, b), 1.0);
  auto tl = simulate(t, config(VariantName::Tlp));
  EXPECT_EQ(tl.speculative_issued, 1u); // delayed prediction dropped on the hit
  EXPECT_EQ(tl.load_latency_sum, 82u + 4);
}

TEST(Timeline, IsolatedLoadsCostTheirServedLevel)
{
  // loads far apart never overlap, so each costs exactly its level's latency
  for (auto v : {VariantName::Baseline, VariantName::Tsp}) {
    SimConfig c = config(VariantName::Baseline, true);
    c.variant = v == VariantName::Tsp ? VariantName::Slp : v; // SLP only: no speculative shortcut
    auto t = random_trace(3, 3000, 40000, 0);
    for (auto& r : t) {
      r.gap = 4000;
      r.kind = AccessKind::Load;
    }
    auto s = simulate(t, c);
    const std::uint64_t want = s.demand_served[0] * 4 + s.demand_served[1] * 14 + s.demand_served[2] * 50 + s.demand_served[3] * 122;
    EXPECT_EQ(s.load_latency_sum, want);
    EXPECT_GT(s.demand_served[1] + s.demand_served[2], 0u);
  }
}

TEST(Timeline, LatencySandwich)
{
  auto t = random_trace(9, 20000, 1 << 18);
  for (auto v : kAllVariants) {
    auto s = simulate(t, config(v, true));
    EXPECT_GE(s.load_latency_sum, s.loads * 4);
    // slowest single load: full miss path plus every queued DRAM cycle plus waiting on an in-flight fill
    EXPECT_LE(s.load_latency_sum, s.loads * (122 + 122) + s.dram.queue_cycles * s.loads);
    EXPECT_GE(s.cycles * 4, s.instructions);
  }
}

TEST(Accounting, BreakdownsSumToTotals)
{
  auto t = preset("mixed", 20000);
  auto t2 = random_trace(5, 20000, 1 << 16);
  for (auto v : kAllVariants)
    for (const auto* tr : {&t, &t2}) {
      auto s = simulate(*tr, config(v, true));
      check_accounting(s);
      EXPECT_EQ(s.instructions, instruction_count(*tr));
    }
}

TEST(Accounting, BaselineIgnoresOffchipModule)
{
  auto t = preset("mixed", 20000);
  auto with = simulate(t, config(VariantName::Baseline, true));
  auto without = simulate(t, config(VariantName::Baseline, true), SimOptions{false});
  EXPECT_EQ(csv_of(with), csv_of(without));
  EXPECT_EQ(with.speculative_issued, 0u);
  EXPECT_EQ(with.dram.speculative_reads, 0u);
}

TEST(Accounting, DeterministicAcrossRuns)
{
  auto t = preset("chase_mix", 20000);
  for (auto v : kAllVariants)
    EXPECT_EQ(csv_of(simulate(t, config(v, true))), csv_of(simulate(t, config(v, true))));
}

TEST(Variants, TlpNeverSpeculatesMoreThanHermes)
{
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto t = random_trace(seed, 20000, 1 << (12 + seed));
    auto h = simulate(t, config(VariantName::Hermes));
    auto tl = simulate(t, config(VariantName::Tlp));
    auto sel = simulate(t, config(VariantName::SelectiveTsp));
    auto del = simulate(t, config(VariantName::DelayedTsp));
    EXPECT_LE(tl.speculative_issued, h.speculative_issued) << seed;
    EXPECT_EQ(tl.speculative_issued, sel.speculative_issued) << seed; // no prefetches, so SLP is idle
    EXPECT_LE(del.speculative_issued, h.speculative_issued) << seed;
    // identical cache behaviour regardless of speculation
    EXPECT_EQ(tl.demand_served, h.demand_served);
  }
}

TEST(Variants, AccuratePredictorBeatsBaselineOnAllMissTrace)
{
  std::vector<TraceRecord> t;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 5000; ++i)
    t.push_back(load((rng() % (1ull << 30)) & ~63ull, 200, 0x400200));
  auto b = simulate(t, config());
  ASSERT_GT(b.demand_served[3], 4900u);
  for (auto v : {VariantName::Hermes, VariantName::Tlp}) {
    auto s = simulate(t, config(v));
    EXPECT_LT(s.cycles, b.cycles) << to_string(v);
    EXPECT_GT(s.speculative_useful, 4800u);
  }
}

TEST(Prefetch, StreamIsAccurate)
{
  SyntheticSpec spec;
  spec.pattern = StreamPattern{};
  spec.record_count = 50000;
  spec.mean_gap = 4;
  auto s = simulate(generate(spec), config(VariantName::Baseline, true));
  ASSERT_TRUE(prefetch_accuracy(s.l1d_pf).has_value());
  EXPECT_GE(*prefetch_accuracy(s.l1d_pf), 0.9);
}

TEST(Prefetch, UniformRandomIsInaccurate)
{
  SyntheticSpec spec;
  spec.pattern = PointerChasePattern{256ull << 20, 0.0};
  spec.record_count = 50000;
  spec.mean_gap = 4;
  SimConfig c = config(VariantName::Baseline, true);
  c.prefetch.l1d_next_line_fallback = false;
  c.prefetch.l1d_degree = 4;
  auto s = simulate(generate(spec), c);
  if (auto a = prefetch_accuracy(s.l1d_pf)) {
    EXPECT_LE(*a, 0.1);
  }
  c.prefetch.l1d_next_line_fallback = true;
  s = simulate(generate(spec), c);
  ASSERT_TRUE(prefetch_accuracy(s.l1d_pf).has_value());
  EXPECT_LE(*prefetch_accuracy(s.l1d_pf), 0.1);
}

TEST(Workloads, StreamInL1dHasCompulsoryMpki)
{
  SyntheticSpec spec;
  spec.pattern = StreamPattern{};
  spec.record_count = 4096; // 8 records per line, 512 lines = 32 KiB
  spec.mean_gap = 3;
  auto t = generate(spec);
  std::set<std::uint64_t> lines;
  for (auto& r : t)
    lines.insert(r.vaddr / 64);
  auto s = simulate(t, config());
  EXPECT_EQ(s.l1d.misses, lines.size());
  EXPECT_DOUBLE_EQ(mpki(s.l1d.misses, s.instructions), lines.size() * 1000.0 / instruction_count(t));
}

TEST(Workloads, ChasePassesMpkiFilter)
{
  auto s = simulate(preset("chase", 1000000), config(VariantName::Baseline, true));
  EXPECT_GT(llc_mpki(s), 1.0);
  auto m = simulate(preset("chase_mix", 200000), config(VariantName::Baseline, true));
  EXPECT_GT(llc_mpki(m), 1.0);
}

TEST(Dram, CyclesNonIncreasingWithBandwidth)
{
  auto t = preset("chase_mix", 50000);
  for (auto v : {VariantName::Baseline, VariantName::Hermes, VariantName::Tlp}) {
    std::uint64_t prev = ~0ull;
    for (double bw : {1.6, 3.2, 6.4, 12.8, 25.6}) {
      SimConfig c = config(v, true);
      c.dram.bandwidth_gbps = bw;
      auto s = simulate(t, c);
      if (v == VariantName::Baseline) {
        EXPECT_LE(s.cycles, prev) << bw;
      }
      prev = s.cycles;
    }
  }
}

TEST(Multicore, IsolatedCoresMatchSingleCore)
{
  SyntheticSpec spec;
  spec.pattern = StridedPattern{64, 256 * 1024}; // fits in the private L2
  spec.record_count = 20000;
  spec.mean_gap = 200;
  auto t = generate(spec);
  auto solo = simulate(t, config(VariantName::Tlp, true));
  std::vector<std::vector<TraceRecord>> four(4, t);
  auto mc = simulate_multicore(four, config(VariantName::Tlp, true));
  ASSERT_EQ(mc.per_core.size(), 4u);
  // DRAM is one shared channel, so simultaneous cold misses still queue;
  // everything decided by cache contents and program order must match
  auto structural = [](const SimStats& s) {
    return std::make_tuple(s.instructions, s.cycles, s.l1d.hits, s.l2.hits, s.llc.hits, s.llc.misses, s.demand_served, s.speculative_issued,
                           s.speculative_location, s.l1d_pf.filled, s.l1d_pf.useful, s.l2_pf.filled, s.offchip.flp_trainings, s.offchip.slp_dropped);
  };
  for (const auto& pc : mc.per_core) {
    EXPECT_EQ(structural(pc), structural(solo));
  }
  EXPECT_EQ(mc.instructions, 4 * solo.instructions);
}

TEST(Multicore, SharedBandwidthQueuesMore)
{
  auto t = preset("chase", 30000);
  SimConfig single = config(VariantName::Baseline, true);
  auto alone = simulate(t, single);
  std::vector<std::vector<TraceRecord>> four;
  for (std::uint64_t s = 1; s <= 4; ++s)
    four.push_back(preset("chase", 30000, s));
  SimConfig shared = single;
  shared.dram.bandwidth_gbps = 3.2;
  auto mc = simulate_multicore(four, shared);
  for (const auto& pc : mc.per_core) {
    EXPECT_GT(pc.dram.queue_cycles, alone.dram.queue_cycles);
    EXPECT_GT(pc.cycles, alone.cycles);
  }
  check_accounting(mc);
}

TEST(Multicore, Deterministic)
{
  std::vector<std::vector<TraceRecord>> two{preset("chase_mix", 20000, 1), preset("chase_mix", 20000, 2)};
  EXPECT_EQ(csv_of(simulate_multicore(two, config(VariantName::Tlp, true))), csv_of(simulate_multicore(two, config(VariantName::Tlp, true))));
}

TEST(Experiment, ParallelEqualsSerial)
{
  auto t = std::make_shared<const std::vector<TraceRecord>>(preset("chase_mix", 20000));
  SimConfig base = config(VariantName::Baseline, true);
  auto jobs = ablation_jobs("t", {t}, base, {kAllVariants.begin(), kAllVariants.end()});
  auto serial = to_csv(records_of(jobs, run_jobs(jobs, 1)));
  auto parallel = to_csv(records_of(jobs, run_jobs(jobs, 3)));
  EXPECT_EQ(serial, parallel);
}

TEST(Engine, RejectsBadInput)
{
  std::vector<TraceRecord> t{load(0)};
  SimConfig c = config();
  c.l1d.ways = 0;
  EXPECT_THROW(simulate(t, c), ConfigError);
  SimConfig two = config();
  two.cores = 2;
  EXPECT_THROW(simulate(t, two), std::invalid_argument);
}
