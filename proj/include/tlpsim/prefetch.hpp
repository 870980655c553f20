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

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tlpsim/cache.hpp"
#include "tlpsim/metadata.hpp"

namespace tlpsim
{

// L1D requests carry virtual addresses, L2 requests physical ones.
struct PrefetchRequest {
  std::uint64_t trigger_pc = 0;
  std::uint64_t trigger_addr = 0;
  std::uint64_t target_addr = 0;
  Level level = Level::L1D;
  unsigned degree_position = 0; // 1-based distance from the trigger
  RequestMetadata metadata{};
};

enum class L1dPrefetcherKind : std::uint8_t { None, NextLine, IpStride };
enum class L2PrefetcherKind : std::uint8_t { None, Stream };

inline L1dPrefetcherKind parse_l1d_prefetcher(std::string_view s)
{
  if (s == "none")
    return L1dPrefetcherKind::None;
  if (s == "next_line")
    return L1dPrefetcherKind::NextLine;
  if (s == "ip_stride")
    return L1dPrefetcherKind::IpStride;
  throw std::invalid_argument("unknown l1d_prefetcher '" + std::string(s) + "'");
}

inline std::string_view to_string(L1dPrefetcherKind k)
{
  switch (k) {
  case L1dPrefetcherKind::None:
    return "none";
  case L1dPrefetcherKind::NextLine:
    return "next_line";
  case L1dPrefetcherKind::IpStride:
    return "ip_stride";
  }
  return "?";
}

inline L2PrefetcherKind parse_l2_prefetcher(std::string_view s)
{
  if (s == "none")
    return L2PrefetcherKind::None;
  if (s == "stream")
    return L2PrefetcherKind::Stream;
  throw std::invalid_argument("unknown l2_prefetcher '" + std::string(s) + "'");
}

inline std::string_view to_string(L2PrefetcherKind k) { return k == L2PrefetcherKind::Stream ? "stream" : "none"; }

namespace detail
{
inline bool same_page(std::uint64_t a, std::uint64_t b, std::uint64_t page_size) { return (a / page_size) == (b / page_size); }
} // namespace detail

// Per-PC stride detector working on cache-line deltas. Same-line repeats are
// ignored. Once a stride has been seen twice in a row the prefetcher emits
// `degree` lines along it, stopping at the page boundary. PCs that have
// history but no confirmed stride fall back to next-line, the way IPCP's
// unclassified IPs do.
class IpStridePrefetcher
{
public:
  static constexpr std::size_t kEntries = 256;

  struct Entry {
    std::uint64_t pc = 0;
    std::uint64_t last_line = 0;
    std::int64_t stride = 0;
    std::uint8_t confidence = 0; // 2-bit
    bool valid = false;
  };

  explicit IpStridePrefetcher(unsigned degree = 4, bool next_line_fallback = true, std::uint64_t page_size = 4096)
      : degree_(degree), fallback_(next_line_fallback), page_size_(page_size)
  {
  }

  std::vector<PrefetchRequest> on_access(std::uint64_t pc, std::uint64_t vaddr, bool /*hit*/)
  {
    std::vector<PrefetchRequest> out;
    const std::uint64_t line = line_of(vaddr);
    Entry& e = table_[index(pc)];
    if (!e.valid || e.pc != pc) {
      e = Entry{pc, line, 0, 0, true};
      return out;
    }

    const std::int64_t stride = static_cast<std::int64_t>(line - e.last_line);
    if (stride == 0)
      return out;
    if (stride == e.stride) {
      if (e.confidence < 3)
        ++e.confidence;
    } else if (e.confidence > 0) {
      --e.confidence;
    }
    if (e.confidence == 0)
      e.stride = stride;
    e.last_line = line;

    if (e.confidence > 0 && stride == e.stride) {
      for (unsigned k = 1; k <= degree_; ++k) {
        std::uint64_t target = (line + static_cast<std::uint64_t>(stride * static_cast<std::int64_t>(k))) << kLineBits;
        if (!detail::same_page(target, vaddr, page_size_))
          break;
        out.push_back(make_request(pc, vaddr, target, k));
      }
    } else if (fallback_) {
      std::uint64_t target = (line + 1) << kLineBits;
      if (detail::same_page(target, vaddr, page_size_))
        out.push_back(make_request(pc, vaddr, target, 1));
    }
    return out;
  }

  const Entry& entry_for(std::uint64_t pc) const { return table_[index(pc)]; }

private:
  static std::size_t index(std::uint64_t pc) { return ((pc >> 2) ^ (pc >> 10) ^ (pc >> 18)) % kEntries; }

  static PrefetchRequest make_request(std::uint64_t pc, std::uint64_t vaddr, std::uint64_t target, unsigned k)
  {
    return {pc, vaddr, target, Level::L1D, k, {}};
  }

  unsigned degree_;
  bool fallback_;
  std::uint64_t page_size_;
  std::array<Entry, kEntries> table_{};
};

class NextLinePrefetcher
{
public:
  explicit NextLinePrefetcher(std::uint64_t page_size = 4096) : page_size_(page_size) {}

  std::vector<PrefetchRequest> on_access(std::uint64_t pc, std::uint64_t vaddr, bool /*hit*/) const
  {
    std::uint64_t target = (line_of(vaddr) + 1) << kLineBits;
    if (!detail::same_page(target, vaddr, page_size_))
      return {};
    return {PrefetchRequest{pc, vaddr, target, Level::L1D, 1, {}}};
  }

private:
  std::uint64_t page_size_;
};

class L1dPrefetcher
{
public:
  L1dPrefetcher(L1dPrefetcherKind kind, unsigned degree, bool fallback, std::uint64_t page_size)
      : kind_(kind), stride_(degree, fallback, page_size), next_line_(page_size)
  {
  }

  std::vector<PrefetchRequest> on_access(std::uint64_t pc, std::uint64_t vaddr, bool hit)
  {
    switch (kind_) {
    case L1dPrefetcherKind::IpStride:
      return stride_.on_access(pc, vaddr, hit);
    case L1dPrefetcherKind::NextLine:
      return next_line_.on_access(pc, vaddr, hit);
    case L1dPrefetcherKind::None:
      break;
    }
    return {};
  }

  L1dPrefetcherKind kind() const { return kind_; }

private:
  L1dPrefetcherKind kind_;
  IpStridePrefetcher stride_;
  NextLinePrefetcher next_line_;
};

// Detects ascending or descending line streams inside a page. Two unit steps
// establish a stream; after that, steps of up to kWindow lines extend it, so a
// missing request does not break it, and requests trailing behind the head
// are ignored. After two steps it emits the next `degree` lines past the
// furthest line seen, staying inside the page.
class StreamPrefetcher
{
public:
  static constexpr std::size_t kTrackers = 16;
  static constexpr std::int64_t kWindow = 4;

  explicit StreamPrefetcher(unsigned degree = 2, std::uint64_t page_size = 4096) : degree_(degree), page_size_(page_size) {}

  std::vector<PrefetchRequest> on_access(std::uint64_t paddr, bool /*hit*/)
  {
    std::vector<PrefetchRequest> out;
    const std::uint64_t page = paddr / page_size_;
    const std::int64_t line = static_cast<std::int64_t>(line_of(paddr));

    Tracker* t = nullptr;
    for (auto& cand : trackers_)
      if (cand.valid && cand.page == page)
        t = &cand;
    if (t == nullptr) {
      t = &*std::min_element(trackers_.begin(), trackers_.end(), [](const auto& a, const auto& b) { return a.lru < b.lru; });
      *t = Tracker{page, line, 0, 0, ++stamp_, true};
      return out;
    }
    t->lru = ++stamp_;

    const std::int64_t delta = line - t->last_line;
    if (delta == 0)
      return out;
    const bool established = t->run >= 2;
    const std::int64_t reach = established ? kWindow : 1;
    const int dir = delta > 0 ? 1 : -1;
    if (delta > reach || delta < -reach) {
      if (established && dir != t->direction && -delta * t->direction <= kWindow)
        return out; // straggler behind the stream head
      t->direction = 0;
      t->run = 0;
      t->last_line = line;
      return out;
    }
    if (dir == t->direction) {
      ++t->run;
      t->last_line = line;
    } else if (established) {
      return out;
    } else {
      t->direction = dir;
      t->run = 1;
      t->last_line = line;
    }

    if (t->run >= 2) {
      for (unsigned k = 1; k <= degree_; ++k) {
        std::int64_t target_line = line + t->direction * static_cast<std::int64_t>(k);
        if (target_line < 0)
          break;
        std::uint64_t target = static_cast<std::uint64_t>(target_line) << kLineBits;
        if (!detail::same_page(target, paddr, page_size_))
          break;
        out.push_back(PrefetchRequest{0, paddr, target, Level::L2, k, {}});
      }
    }
    return out;
  }

private:
  struct Tracker {
    std::uint64_t page = 0;
    std::int64_t last_line = 0;
    int direction = 0;
    unsigned run = 0;
    std::uint64_t lru = 0;
    bool valid = false;
  };

  unsigned degree_;
  std::uint64_t page_size_;
  std::uint64_t stamp_ = 0;
  std::array<Tracker, kTrackers> trackers_{};
};

} // namespace tlpsim
