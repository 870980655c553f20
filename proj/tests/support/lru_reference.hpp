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

#pragma once

#include <algorithm>
#include <cstdint>
#include <list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tlpsim/cache.hpp"

namespace tlpsim::testing
{

// Brute-force LRU model: one recency list per set, front = most recent.
class LruReference
{
public:
  struct Line {
    std::uint64_t line;
    bool dirty;
  };

  LruReference(std::uint64_t sets, std::uint32_t ways) : sets_(sets), ways_(ways), lists_(sets) {}

  bool lookup(std::uint64_t paddr)
  {
    auto& l = lists_[(paddr >> 6) % sets_];
    auto it = std::find_if(l.begin(), l.end(), [&](const Line& x) { return x.line == paddr >> 6; });
    if (it == l.end())
      return false;
    l.splice(l.begin(), l, it);
    return true;
  }

  std::optional<Line> fill(std::uint64_t paddr, bool dirty)
  {
    auto& l = lists_[(paddr >> 6) % sets_];
    auto it = std::find_if(l.begin(), l.end(), [&](const Line& x) { return x.line == paddr >> 6; });
    if (it != l.end()) {
      it->dirty = it->dirty || dirty;
      l.splice(l.begin(), l, it);
      return std::nullopt;
    }
    std::optional<Line> victim;
    if (l.size() == ways_) {
      victim = l.back();
      l.pop_back();
    }
    l.push_front({paddr >> 6, dirty});
    return victim;
  }

private:
  std::uint64_t sets_;
  std::uint32_t ways_;
  std::vector<std::list<Line>> lists_;
};

// Replays `ops` random lookups/fills against both models. Returns an empty
// string on agreement, else a description of the first divergence.
inline std::string compare_with_reference(std::uint64_t sets, std::uint32_t ways, std::uint64_t seed, std::size_t ops)
{
  CacheGeometry g{sets * ways * 64, ways, 4, 1};
  Cache cache(g);
  LruReference ref(sets, ways);
  std::mt19937_64 rng(seed);
  // a few more distinct lines than the cache holds keeps hits and evictions both common
  const std::uint64_t universe = sets * ways * 3;
  for (std::size_t i = 0; i < ops; ++i) {
    const std::uint64_t paddr = (rng() % universe) * 64 + rng() % 64;
    const unsigned op = rng() % 3;
    if (op < 2) {
      bool hit = cache.lookup(paddr).hit;
      if (hit != ref.lookup(paddr))
        return "lookup mismatch at op " + std::to_string(i);
    } else {
      bool dirty = rng() & 1;
      auto a = cache.fill(paddr, dirty);
      auto b = ref.fill(paddr, dirty);
      if (a.has_value() != b.has_value() || (a && (a->line != b->line || a->dirty != b->dirty)))
        return "fill mismatch at op " + std::to_string(i);
    }
  }
  return {};
}

} // namespace tlpsim::testing
