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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpsim/metadata.hpp"

namespace tlpsim
{

inline constexpr unsigned kLineBits = 6;
inline constexpr std::uint64_t kLineSize = 64;

constexpr std::uint64_t line_of(std::uint64_t addr) { return addr >> kLineBits; }

// Where a request was finally served from. Ordered by distance from the core.
enum class Level : std::uint8_t { L1D = 0, L2 = 1, LLC = 2, DRAM = 3 };

inline const char* to_string(Level l)
{
  switch (l) {
  case Level::L1D:
    return "L1D";
  case Level::L2:
    return "L2";
  case Level::LLC:
    return "LLC";
  case Level::DRAM:
    return "DRAM";
  }
  return "?";
}

struct CacheGeometry {
  std::uint64_t capacity = 32 * 1024;
  std::uint32_t ways = 8;
  std::uint32_t latency = 4;
  std::uint32_t mshr = 10;

  std::uint64_t sets() const { return capacity / (std::uint64_t{ways} * kLineSize); }

  void validate(const std::string& name) const
  {
    if (capacity == 0 || ways == 0 || latency == 0 || mshr == 0)
      throw std::invalid_argument(name + ": all geometry fields must be positive");
    if (capacity % (std::uint64_t{ways} * kLineSize) != 0)
      throw std::invalid_argument(name + ": capacity must be divisible by ways x 64");
  }

  friend bool operator==(const CacheGeometry&, const CacheGeometry&) = default;
};

struct Block {
  std::uint64_t line = 0;
  std::uint64_t lru = 0;
  std::uint64_t ready = 0; // cycle at which the data is actually present
  bool valid = false;
  bool dirty = false;
  bool prefetched = false; // filled by a prefetch and not yet demanded
  Level fill_level = Level::L1D;
};

struct Eviction {
  std::uint64_t line;
  bool dirty;
  bool prefetched;
  Level fill_level;
};

struct FillInfo {
  std::uint64_t ready = 0;
  bool prefetched = false;
  Level fill_level = Level::L1D;
};

struct LookupResult {
  bool hit = false;
  std::uint32_t latency = 0;
  Block* block = nullptr;
};

// Set-associative LRU cache over physical byte addresses.
class Cache
{
public:
  explicit Cache(const CacheGeometry& geometry) : geometry_(geometry)
  {
    geometry_.validate("cache");
    sets_ = geometry_.sets();
    blocks_.resize(sets_ * geometry_.ways);
  }

  const CacheGeometry& geometry() const { return geometry_; }
  std::uint64_t set_of(std::uint64_t paddr) const { return line_of(paddr) % sets_; }

  // A hit refreshes recency; a miss leaves the set untouched.
  LookupResult lookup(std::uint64_t paddr)
  {
    Block* b = find(paddr);
    if (b == nullptr)
      return {};
    b->lru = ++stamp_;
    return {true, geometry_.latency, b};
  }

  // No recency update.
  Block* find(std::uint64_t paddr)
  {
    const std::uint64_t line = line_of(paddr);
    for (auto& b : set_span(line))
      if (b.valid && b.line == line)
        return &b;
    return nullptr;
  }
  const Block* find(std::uint64_t paddr) const { return const_cast<Cache*>(this)->find(paddr); }

  // Inserts at MRU. Refills of a resident line merge flags and evict nothing.
  std::optional<Eviction> fill(std::uint64_t paddr, bool dirty, const FillInfo& info = {})
  {
    const std::uint64_t line = line_of(paddr);
    auto set = set_span(line);
    if (auto it = std::find_if(set.begin(), set.end(), [line](const Block& b) { return b.valid && b.line == line; }); it != set.end()) {
      it->dirty |= dirty;
      it->lru = ++stamp_;
      return std::nullopt;
    }

    std::optional<Eviction> evicted;
    auto victim = std::find_if(set.begin(), set.end(), [](const Block& b) { return !b.valid; });
    if (victim == set.end()) {
      victim = std::min_element(set.begin(), set.end(), [](const Block& a, const Block& b) { return a.lru < b.lru; });
      evicted = Eviction{victim->line, victim->dirty, victim->prefetched, victim->fill_level};
    }
    *victim = Block{line, ++stamp_, info.ready, true, dirty, info.prefetched, info.fill_level};
    return evicted;
  }

  template <typename F>
  void for_each_valid(F&& f) const
  {
    for (const auto& b : blocks_)
      if (b.valid)
        f(b);
  }

  std::span<const Block> set_blocks(std::uint64_t set) const { return {blocks_.data() + set * geometry_.ways, geometry_.ways}; }

private:
  std::span<Block> set_span(std::uint64_t line) { return {blocks_.data() + (line % sets_) * geometry_.ways, geometry_.ways}; }

  CacheGeometry geometry_;
  std::uint64_t sets_ = 0;
  std::uint64_t stamp_ = 0;
  std::vector<Block> blocks_;
};

struct MshrEntry {
  std::uint64_t line = 0;
  std::uint64_t completion = 0;
  RequestMetadata metadata{};
  bool is_prefetch = false;
};

// Outstanding-miss file. Requests arriving while every entry is busy wait for
// the earliest completion.
class Mshr
{
public:
  explicit Mshr(std::size_t capacity) : capacity_(capacity) { entries_.reserve(capacity); }

  // Earliest cycle >= now at which an entry can be allocated.
  std::uint64_t acquire(std::uint64_t now)
  {
    std::erase_if(entries_, [now](const MshrEntry& e) { return e.completion <= now; });
    if (entries_.size() < capacity_)
      return now;
    auto earliest = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.completion < b.completion; });
    std::uint64_t start = earliest->completion;
    entries_.erase(earliest);
    return start;
  }

  void insert(const MshrEntry& entry)
  {
    if (entries_.size() >= capacity_)
      throw std::logic_error("MSHR overflow");
    auto dup = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.line == entry.line; });
    if (dup != entries_.end())
      *dup = entry;
    else
      entries_.push_back(entry);
  }

  const MshrEntry* find(std::uint64_t line) const
  {
    auto it = std::find_if(entries_.begin(), entries_.end(), [line](const auto& e) { return e.line == line; });
    return it == entries_.end() ? nullptr : &*it;
  }

  std::size_t occupancy() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

private:
  std::size_t capacity_;
  std::vector<MshrEntry> entries_;
};

} // namespace tlpsim
