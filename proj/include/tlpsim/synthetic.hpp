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
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tlpsim/trace.hpp"

namespace tlpsim
{

class SpecError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// vaddr advances by one cache line per record.
struct StreamPattern {
};

// vaddr advances by `stride` bytes per record, wrapping inside `footprint`
// bytes when footprint is nonzero.
struct StridedPattern {
  std::int64_t stride = 256;
  std::uint64_t footprint = 0;
};

// Targets drawn from a footprint of cache lines ranked by popularity; rank r
// has probability proportional to r^-exponent. Exponent 0 is uniform.
// With probability `revisit` the next target is the previous line again (another
// field of the same node); with probability `neighbor` it is another line
// of the previous page. `clustered` packs popular lines into shared pages;
// otherwise popularity is independent of address.
struct PointerChasePattern {
  std::uint64_t footprint = 64ull << 20;
  double exponent = 0.8;
  bool clustered = true;
  double revisit = 0.0;
  double neighbor = 0.0;
};

// Per-record mixture of the three component patterns, each with its own PCs
// and address region.
struct MixedPattern {
  double stream_weight = 0.0;
  double strided_weight = 0.6;
  double chase_weight = 0.4;
  StridedPattern strided{8, 0};
  PointerChasePattern chase{};
};

using Pattern = std::variant<StreamPattern, StridedPattern, PointerChasePattern, MixedPattern>;

struct SyntheticSpec {
  Pattern pattern = StreamPattern{};
  std::uint64_t record_count = 0;
  std::uint64_t seed = 1;
  std::uint64_t page_size = 4096;
  std::uint64_t base = 0;
  std::uint32_t mean_gap = 0;   // gaps uniform in [0, 2*mean_gap]
  double store_ratio = 0.0;
};

// PC bases per component. Region bases keep components in disjoint pages.
inline constexpr std::uint64_t kStreamPc = 0x401000;
inline constexpr std::uint64_t kStridedPc = 0x402000;
inline constexpr std::uint64_t kChasePc = 0x403000;
inline constexpr std::uint64_t kStorePcOffset = 0x800;
inline constexpr std::uint64_t kChasePcCount = 4;
inline constexpr std::uint64_t kRegionStride = 1ull << 40;

namespace detail
{
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n)
{
  // rejection sampling keeps the draw portable across standard libraries
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

inline double unit_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
} // namespace detail

// Exact discrete sampler for ranks 0..n-1 with weight (rank+1)^-exponent.
class PowerLawSampler
{
public:
  PowerLawSampler(std::uint64_t n, double exponent) : cdf_(n)
  {
    double acc = 0.0;
    for (std::uint64_t r = 0; r < n; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -exponent);
      cdf_[r] = acc;
    }
    for (auto& c : cdf_)
      c /= acc;
    cdf_.back() = 1.0;
  }

  std::uint64_t operator()(std::mt19937_64& rng) const
  {
    double u = detail::unit_real(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

  double probability(std::uint64_t rank) const { return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1]; }
  std::uint64_t size() const { return cdf_.size(); }

private:
  std::vector<double> cdf_;
};

namespace detail
{
class ChaseSource
{
public:
  ChaseSource(const PointerChasePattern& p, std::uint64_t page_size, std::uint64_t base, std::mt19937_64& rng)
      : sampler_(p.footprint / 64, p.exponent), revisit_(p.revisit), neighbor_(p.neighbor), lines_per_page_(std::max<std::uint64_t>(1, page_size / 64)), base_(base)
  {
    // popular ranks share pages (hot pages), pages themselves are scattered
    std::uint64_t pages = (sampler_.size() + lines_per_page_ - 1) / lines_per_page_;
    page_perm_.resize(pages);
    std::iota(page_perm_.begin(), page_perm_.end(), 0);
    for (std::uint64_t i = pages; i > 1; --i)
      std::swap(page_perm_[i - 1], page_perm_[uniform_below(rng, i)]);
    line_mult_ = (rng() % lines_per_page_) | 1;
    if (!p.clustered) {
      line_perm_.resize(sampler_.size());
      std::iota(line_perm_.begin(), line_perm_.end(), 0);
      for (std::uint64_t i = line_perm_.size(); i > 1; --i)
        std::swap(line_perm_[i - 1], line_perm_[uniform_below(rng, i)]);
    }
  }

  TraceRecord next(std::mt19937_64& rng)
  {
    double u = revisit_ + neighbor_ > 0.0 ? unit_real(rng) : 1.0;
    if (!started_ || u >= revisit_ + neighbor_) {
      std::uint64_t rank = sampler_(rng);
      if (!line_perm_.empty())
        rank = line_perm_[rank];
      page_ = page_perm_[rank / lines_per_page_];
      line_ = (rank % lines_per_page_) * line_mult_ % lines_per_page_;
      started_ = true;
    } else if (u >= revisit_) {
      line_ = uniform_below(rng, lines_per_page_);
    }
    std::uint64_t field = uniform_below(rng, kChasePcCount);
    TraceRecord rec;
    rec.pc = kChasePc + field * 0x40;
    rec.vaddr = base_ + (page_ * lines_per_page_ + line_) * 64 + field * 8;
    return rec;
  }

private:
  PowerLawSampler sampler_;
  double revisit_;
  double neighbor_;
  bool started_ = false;
  std::uint64_t page_ = 0;
  std::uint64_t line_ = 0;
  std::uint64_t lines_per_page_;
  std::uint64_t base_;
  std::vector<std::uint64_t> page_perm_;
  std::vector<std::uint64_t> line_perm_;
  std::uint64_t line_mult_ = 1;
};

class StridedSource
{
public:
  StridedSource(std::uint64_t pc, std::int64_t stride, std::uint64_t footprint, std::uint64_t base)
      : pc_(pc), stride_(stride), footprint_(footprint), base_(base)
  {
  }

  TraceRecord next()
  {
    TraceRecord rec;
    rec.pc = pc_;
    rec.vaddr = base_ + offset_;
    std::int64_t next = static_cast<std::int64_t>(offset_) + stride_;
    if (footprint_ != 0)
      next = ((next % static_cast<std::int64_t>(footprint_)) + static_cast<std::int64_t>(footprint_)) % static_cast<std::int64_t>(footprint_);
    offset_ = static_cast<std::uint64_t>(next);
    return rec;
  }

private:
  std::uint64_t pc_;
  std::int64_t stride_;
  std::uint64_t footprint_;
  std::uint64_t base_;
  std::uint64_t offset_ = 0;
};
} // namespace detail

inline void validate(const SyntheticSpec& spec)
{
  if (spec.record_count == 0)
    throw SpecError("record_count must be positive");
  if (spec.page_size == 0 || (spec.page_size & (spec.page_size - 1)) != 0)
    throw SpecError("page_size must be a power of two");
  if (spec.store_ratio < 0.0 || spec.store_ratio > 1.0)
    throw SpecError("store_ratio must be within [0, 1]");
  auto check_chase = [](const PointerChasePattern& p) {
    if (p.footprint < 64)
      throw SpecError("pointer-chase footprint must be at least one cache line");
    if (p.exponent < 0.0)
      throw SpecError("power-law exponent must be non-negative");
    if (p.revisit < 0.0 || p.neighbor < 0.0 || p.revisit + p.neighbor > 1.0)
      throw SpecError("revisit and neighbor probabilities must be non-negative and sum to at most 1");
  };
  auto check_strided = [](const StridedPattern& p) {
    if (p.stride == 0)
      throw SpecError("stride must be nonzero");
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PointerChasePattern>)
          check_chase(p);
        else if constexpr (std::is_same_v<T, StridedPattern>)
          check_strided(p);
        else if constexpr (std::is_same_v<T, MixedPattern>) {
          if (p.stream_weight < 0 || p.strided_weight < 0 || p.chase_weight < 0 || p.stream_weight + p.strided_weight + p.chase_weight <= 0)
            throw SpecError("mixed weights must be non-negative with a positive sum");
          if (p.chase_weight > 0)
            check_chase(p.chase);
          if (p.strided_weight > 0)
            check_strided(p.strided);
        }
      },
      spec.pattern);
}

inline std::vector<TraceRecord> generate(const SyntheticSpec& spec)
{
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<TraceRecord> out;
  out.reserve(spec.record_count);

  detail::StridedSource stream(kStreamPc, 64, 0, spec.base);
  std::optional<detail::StridedSource> strided;
  std::optional<detail::ChaseSource> chase;
  double w_stream = 0, w_strided = 0, w_chase = 0;

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StreamPattern>) {
          w_stream = 1;
        } else if constexpr (std::is_same_v<T, StridedPattern>) {
          strided.emplace(kStridedPc, p.stride, p.footprint, spec.base + kRegionStride);
          w_strided = 1;
        } else if constexpr (std::is_same_v<T, PointerChasePattern>) {
          chase.emplace(p, spec.page_size, spec.base + 2 * kRegionStride, rng);
          w_chase = 1;
        } else {
          w_stream = p.stream_weight;
          w_strided = p.strided_weight;
          w_chase = p.chase_weight;
          if (w_strided > 0)
            strided.emplace(kStridedPc, p.strided.stride, p.strided.footprint, spec.base + kRegionStride);
          if (w_chase > 0)
            chase.emplace(p.chase, spec.page_size, spec.base + 2 * kRegionStride, rng);
        }
      },
      spec.pattern);

  const double total = w_stream + w_strided + w_chase;
  const bool mixed = std::holds_alternative<MixedPattern>(spec.pattern);
  for (std::uint64_t i = 0; i < spec.record_count; ++i) {
    TraceRecord rec;
    if (!mixed) {
      rec = w_stream > 0 ? stream.next() : (strided ? strided->next() : chase->next(rng));
    } else {
      double u = detail::unit_real(rng) * total;
      if (u < w_stream)
        rec = stream.next();
      else if (u < w_stream + w_strided)
        rec = strided->next();
      else
        rec = chase->next(rng);
    }
    if (spec.mean_gap > 0)
      rec.gap = static_cast<std::uint16_t>(std::min<std::uint64_t>(65535, detail::uniform_below(rng, 2ull * spec.mean_gap + 1)));
    if (spec.store_ratio > 0.0 && detail::unit_real(rng) < spec.store_ratio) {
      rec.kind = AccessKind::Store;
      rec.pc += kStorePcOffset;
    }
    out.push_back(rec);
  }
  return out;
}

} // namespace tlpsim
