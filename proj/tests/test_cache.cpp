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
#include <set>

#include "lru_reference.hpp"
#include "tlpsim/cache.hpp"
#include "tlpsim/page_map.hpp"

using namespace tlpsim;

namespace
{
CacheGeometry two_way(std::uint64_t sets) { return {sets * 2 * 64, 2, 4, 4}; }
} // namespace

TEST(Cache, ColdMissThenHit)
{
  Cache c(CacheGeometry{32 * 1024, 8, 4, 10});
  EXPECT_FALSE(c.lookup(0x1234).hit);
  EXPECT_FALSE(c.fill(0x1234, false).has_value());
  auto r = c.lookup(0x1200);
  EXPECT_TRUE(r.hit);
  EXPECT_EQ(r.latency, 4u);
  EXPECT_FALSE(c.lookup(0x1240).hit);
}

TEST(Cache, LruVictim)
{
  Cache c(two_way(1));
  c.fill(0x000, false); // A
  c.fill(0x040, true);  // B
  c.lookup(0x000);
  auto v = c.fill(0x080, false); // C evicts B
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->line, 1u);
  EXPECT_TRUE(v->dirty);
  EXPECT_FALSE(c.lookup(0x040).hit);
  EXPECT_TRUE(c.lookup(0x000).hit);
  EXPECT_TRUE(c.lookup(0x080).hit);
}

TEST(Cache, FullEightWaySetEvictsExactlyTheOldest)
{
  Cache c(CacheGeometry{32 * 1024, 8, 4, 10});
  const std::uint64_t stride = c.geometry().sets() * 64;
  for (int i = 0; i < 8; ++i)
    EXPECT_FALSE(c.fill(i * stride, false).has_value());
  auto v = c.fill(8 * stride, false);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->line, 0u);
}

TEST(Cache, RefillMergesWithoutEviction)
{
  Cache c(two_way(1));
  c.fill(0x000, false);
  c.fill(0x040, false);
  EXPECT_FALSE(c.fill(0x000, true).has_value());
  EXPECT_TRUE(c.find(0x000)->dirty);
  // refill refreshed A, so B is the victim
  EXPECT_EQ(c.fill(0x080, false)->line, 1u);
}

TEST(Cache, MissDoesNotTouchRecency)
{
  Cache c(two_way(1));
  c.fill(0x000, false);
  c.fill(0x040, false);
  c.lookup(0x0C0); // miss
  EXPECT_EQ(c.fill(0x080, false)->line, 0u);
}

TEST(Cache, PrefetchFlagsTravelWithVictim)
{
  Cache c(two_way(1));
  c.fill(0x000, false, {10, true, Level::DRAM});
  c.fill(0x040, false);
  auto v = c.fill(0x080, false);
  ASSERT_TRUE(v.has_value());
  EXPECT_TRUE(v->prefetched);
  EXPECT_EQ(v->fill_level, Level::DRAM);
}

TEST(Cache, SetInvariants)
{
  Cache c(CacheGeometry{4 * 8 * 64, 8, 4, 1});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) {
    std::uint64_t a = (rng() % 200) * 64;
    if (rng() & 1)
      c.fill(a, false);
    else
      c.lookup(a);
  }
  for (std::uint64_t s = 0; s < 4; ++s) {
    std::set<std::uint64_t> lines, stamps;
    for (auto& b : c.set_blocks(s)) {
      if (!b.valid)
        continue;
      EXPECT_TRUE(lines.insert(b.line).second);
      EXPECT_TRUE(stamps.insert(b.lru).second);
      EXPECT_EQ(b.line % 4, s);
    }
  }
}

TEST(Cache, GeometryValidation)
{
  EXPECT_THROW(Cache(CacheGeometry{1000, 8, 4, 1}), std::invalid_argument);
  EXPECT_THROW(Cache(CacheGeometry{4096, 0, 4, 1}), std::invalid_argument);
  EXPECT_THROW(Cache(CacheGeometry{4096, 8, 0, 1}), std::invalid_argument);
  EXPECT_EQ((CacheGeometry{1408 * 1024, 11, 36, 64}.sets()), 2048u);
}

class ReferenceModel : public ::testing::TestWithParam<std::pair<std::uint64_t, std::uint32_t>>
{
};

TEST_P(ReferenceModel, MatchesBruteForceLru)
{
  auto [sets, ways] = GetParam();
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    ASSERT_EQ(tlpsim::testing::compare_with_reference(sets, ways, seed, 10000), "") << "seed " << seed;
}

INSTANTIATE_TEST_SUITE_P(Shapes, ReferenceModel,
                         ::testing::Values(std::make_pair(2ull, 2u), std::make_pair(4ull, 8u), std::make_pair(1ull, 1u), std::make_pair(16ull, 4u)));

TEST(Mshr, AcquireWaitsForEarliestCompletion)
{
  Mshr m(2);
  EXPECT_EQ(m.acquire(0), 0u);
  m.insert({1, 50});
  m.insert({2, 30});
  EXPECT_EQ(m.acquire(10), 30u);
  m.insert({3, 80});
  EXPECT_EQ(m.occupancy(), 2u);
  EXPECT_EQ(m.acquire(60), 60u); // line 1 done by then
  EXPECT_NE(m.find(3), nullptr);
  EXPECT_EQ(m.find(1), nullptr);
}

TEST(Mshr, OneEntryPerLine)
{
  Mshr m(2);
  m.insert({7, 10});
  m.insert({7, 20});
  EXPECT_EQ(m.occupancy(), 1u);
  EXPECT_EQ(m.find(7)->completion, 20u);
  m.insert({8, 10});
  EXPECT_THROW(m.insert({9, 10}), std::logic_error);
}

TEST(PageMap, FirstTouchSequential)
{
  PageMap pm;
  EXPECT_EQ(pm.translate(5 * 4096 + 0x10), 0x10u);
  EXPECT_EQ(pm.translate(5 * 4096 + 0x20), 0x20u);
  EXPECT_EQ(pm.translate(0x5123) & 0xFFF, 0x123u);
  EXPECT_EQ(pm.translate(0x6123) >> 12, 1u);
  EXPECT_EQ(pm.mapped_pages(), 2u);
  EXPECT_THROW(PageMap(3000), std::invalid_argument);
}

TEST(PageMap, ShuffledIsInjectiveAndStable)
{
  PageMap pm(4096, 99);
  std::set<std::uint64_t> frames;
  for (std::uint64_t p = 0; p < 20000; ++p)
    EXPECT_TRUE(frames.insert(pm.translate(p * 4096) >> 12).second);
  EXPECT_EQ(pm.translate(1234 * 4096 + 7), pm.translate(1234 * 4096) + 7);
}

TEST(PageMap, FrameBaseSeparatesAddressSpaces)
{
  PageMap a(4096, 0, 0), b(4096, 0, 1ull << 28);
  EXPECT_NE(a.translate(0) >> 12, b.translate(0) >> 12);
  EXPECT_EQ(b.translate(0) >> 12, 1ull << 28);
}
