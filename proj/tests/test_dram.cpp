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

#include <random>

#include "tlpsim/dram.hpp"

using namespace tlpsim;

TEST(Dram, SingleReadTakesServiceLatency)
{
  Dram d(DramConfig{});
  auto r = d.read(1, 100, DramSource::Demand);
  EXPECT_EQ(r.completion, 172u);
  EXPECT_FALSE(r.merged);
  EXPECT_EQ(d.counters().demand_reads, 1u);
}

TEST(Dram, NineteenCyclesPerLineAtDefaultRate)
{
  Dram d(DramConfig{});
  EXPECT_DOUBLE_EQ(d.line_interval(), 19.0);
  for (std::uint64_t i = 0; i < 10; ++i)
    EXPECT_EQ(d.read(i, 0, DramSource::Demand).completion, 72 + 19 * i);
  EXPECT_EQ(d.counters().queue_cycles, 19u * 45u);
}

TEST(Dram, SameLineMerges)
{
  Dram d(DramConfig{});
  auto a = d.read(5, 0, DramSource::Speculative);
  auto b = d.read(5, 10, DramSource::Demand);
  EXPECT_TRUE(b.merged);
  EXPECT_EQ(a.completion, b.completion);
  EXPECT_EQ(d.counters().reads(), 1u);
  EXPECT_EQ(d.counters().merged_demand, 1u);
  // after completion a new read is a new transaction
  auto c = d.read(5, a.completion, DramSource::Demand);
  EXPECT_FALSE(c.merged);
  EXPECT_EQ(d.counters().reads(), 2u);
}

TEST(Dram, TwentyCycleTokenSpacing)
{
  // 64 B per 20 cycles at 3.8 GHz is 12.16 GB/s
  Dram d(DramConfig{72, 12.16, 3800});
  EXPECT_DOUBLE_EQ(d.line_interval(), 20.0);
  auto a = d.read(1, 0, DramSource::Demand);
  auto b = d.read(2, 0, DramSource::Demand);
  EXPECT_GE(b.completion, 0u + 20u + 72u);
  EXPECT_EQ(b.completion - a.completion, 20u);
}

TEST(Dram, FractionalIntervalIsExact)
{
  // 25.6 GB/s gives 9.5 cycles per line: starts alternate 0,10,19,29,38
  Dram d(DramConfig{72, 25.6, 3800});
  std::vector<std::uint64_t> got;
  for (std::uint64_t i = 0; i < 5; ++i)
    got.push_back(d.read(i, 0, DramSource::Demand).completion - 72);
  EXPECT_EQ(got, (std::vector<std::uint64_t>{0, 10, 19, 29, 38}));
}

TEST(Dram, WritesConsumeBandwidth)
{
  Dram d(DramConfig{});
  d.write(1, 0);
  EXPECT_EQ(d.read(2, 0, DramSource::Demand).completion, 19u + 72u);
  EXPECT_EQ(d.counters().writebacks, 1u);
  EXPECT_EQ(d.counters().reads(), 1u);
}

TEST(Dram, IdleChannelDoesNotBankCredit)
{
  Dram d(DramConfig{});
  d.read(1, 0, DramSource::Demand);
  EXPECT_EQ(d.read(2, 1000, DramSource::Demand).completion, 1072u);
  EXPECT_EQ(d.read(3, 1000, DramSource::Demand).completion, 1091u);
}

TEST(Dram, PerCoreCountersAndSharedRate)
{
  Dram d(DramConfig{72, 3.2, 3800}, 4); // 4 x 3.2 = 12.8 total
  EXPECT_DOUBLE_EQ(d.line_interval(), 19.0);
  d.read(1, 0, DramSource::Demand, 0);
  d.read(2, 0, DramSource::Prefetch, 3);
  EXPECT_EQ(d.counters(0).demand_reads, 1u);
  EXPECT_EQ(d.counters(3).prefetch_reads, 1u);
  EXPECT_EQ(d.total().reads(), 2u);
  EXPECT_GT(d.counters(3).queue_cycles, 0u);
}

TEST(Dram, RejectsZeroRate)
{
  EXPECT_THROW(Dram(DramConfig{72, 0.0, 3800}), std::invalid_argument);
  EXPECT_THROW(Dram(DramConfig{72, 12.8, 0}), std::invalid_argument);
}

TEST(Dram, BandwidthNeverExceeded)
{
  Dram d(DramConfig{72, 6.4, 3800});
  std::mt19937_64 rng(11);
  std::vector<std::uint64_t> starts;
  std::uint64_t now = 0;
  for (int i = 0; i < 2000; ++i) {
    now += rng() % 30;
    auto r = d.read(rng(), now, DramSource::Demand);
    if (!r.merged)
      starts.push_back(r.completion - 72);
  }
  std::sort(starts.begin(), starts.end());
  // any k consecutive transfers span at least (k-1) x 38 cycles
  for (std::size_t i = 10; i < starts.size(); ++i)
    ASSERT_GE(starts[i] - starts[i - 10], 10u * 38u - 1u);
}

TEST(Dram, MoreBandwidthNeverDelays)
{
  std::mt19937_64 rng(12);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> reqs;
  std::uint64_t now = 0;
  for (int i = 0; i < 3000; ++i) {
    now += rng() % 25;
    reqs.emplace_back(i, now);
  }
  std::vector<std::uint64_t> prev;
  for (double bw : {1.6, 3.2, 6.4, 12.8, 25.6}) {
    Dram d(DramConfig{72, bw, 3800});
    std::vector<std::uint64_t> done;
    for (auto [line, t] : reqs)
      done.push_back(d.read(line, t, DramSource::Demand).completion);
    for (std::size_t i = 0; i < prev.size(); ++i)
      ASSERT_LE(done[i], prev[i]) << bw << " request " << i;
    prev = done;
  }
}
