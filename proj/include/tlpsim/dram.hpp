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
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace tlpsim
{

enum class DramSource : std::uint8_t { Demand = 0, Prefetch = 1, Speculative = 2 };

struct DramConfig {
  std::uint32_t service_latency = 72; // tRP + tRCD + tCAS at 24 cycles each
  double bandwidth_gbps = 12.8;       // per core
  std::uint32_t core_mhz = 3800;

  friend bool operator==(const DramConfig&, const DramConfig&) = default;
};

struct DramCounters {
  std::uint64_t demand_reads = 0;
  std::uint64_t prefetch_reads = 0;
  std::uint64_t speculative_reads = 0;
  std::uint64_t merged_demand = 0;
  std::uint64_t merged_prefetch = 0;
  std::uint64_t merged_speculative = 0;
  std::uint64_t writebacks = 0;
  std::uint64_t queue_cycles = 0;

  std::uint64_t reads() const { return demand_reads + prefetch_reads + speculative_reads; }
};

struct DramResult {
  std::uint64_t completion = 0;
  bool merged = false;
};

// Fixed service latency behind a single bandwidth-limited channel. Line
// transfers are spaced by 64 B / rate, tracked as an exact rational so that
// e.g. 12.8 GB/s at 3.8 GHz gives exactly 19 cycles per line. A read for a
// line already in flight shares that request's completion and is not a new
// transaction.
class Dram
{
public:
  explicit Dram(const DramConfig& cfg, unsigned cores = 1)
      : cfg_(cfg), rate_mbps_(static_cast<std::uint64_t>(std::llround(cfg.bandwidth_gbps * 1000.0)) * cores), counters_(cores)
  {
    if (rate_mbps_ == 0 || cfg.core_mhz == 0 || cores == 0)
      throw std::invalid_argument("DRAM bandwidth, clock, and core count must be positive");
    per_line_ = 64ull * cfg.core_mhz; // in units of 1/rate_mbps_ cycles
  }

  DramResult read(std::uint64_t line, std::uint64_t now, DramSource source, unsigned core = 0)
  {
    auto& c = counters_.at(core);
    if (auto it = inflight_.find(line); it != inflight_.end() && it->second > now) {
      switch (source) {
      case DramSource::Demand:
        ++c.merged_demand;
        break;
      case DramSource::Prefetch:
        ++c.merged_prefetch;
        break;
      case DramSource::Speculative:
        ++c.merged_speculative;
        break;
      }
      return {it->second, true};
    }

    const std::uint64_t start = reserve_slot(now);
    c.queue_cycles += start - now;
    const std::uint64_t completion = start + cfg_.service_latency;
    switch (source) {
    case DramSource::Demand:
      ++c.demand_reads;
      break;
    case DramSource::Prefetch:
      ++c.prefetch_reads;
      break;
    case DramSource::Speculative:
      ++c.speculative_reads;
      break;
    }
    inflight_[line] = completion;
    if (inflight_.size() > prune_at_)
      prune(now);
    return {completion, false};
  }

  void write(std::uint64_t /*line*/, std::uint64_t now, unsigned core = 0)
  {
    reserve_slot(now);
    ++counters_.at(core).writebacks;
  }

  bool in_flight(std::uint64_t line, std::uint64_t now) const
  {
    auto it = inflight_.find(line);
    return it != inflight_.end() && it->second > now;
  }

  // Average cycles between line transfers.
  double line_interval() const { return static_cast<double>(per_line_) / static_cast<double>(rate_mbps_); }
  std::uint64_t line_interval_ceil() const { return (per_line_ + rate_mbps_ - 1) / rate_mbps_; }

  const DramCounters& counters(unsigned core = 0) const { return counters_.at(core); }
  DramCounters total() const
  {
    DramCounters t;
    for (const auto& c : counters_) {
      t.demand_reads += c.demand_reads;
      t.prefetch_reads += c.prefetch_reads;
      t.speculative_reads += c.speculative_reads;
      t.merged_demand += c.merged_demand;
      t.merged_prefetch += c.merged_prefetch;
      t.merged_speculative += c.merged_speculative;
      t.writebacks += c.writebacks;
      t.queue_cycles += c.queue_cycles;
    }
    return t;
  }
  const DramConfig& config() const { return cfg_; }

private:
  static constexpr std::size_t kPruneThreshold = 1 << 14;
  static constexpr std::uint64_t kPruneHorizon = 1 << 16;

  std::uint64_t reserve_slot(std::uint64_t now)
  {
    const std::uint64_t start_u = std::max(now * rate_mbps_, next_free_u_);
    next_free_u_ = start_u + per_line_;
    return (start_u + rate_mbps_ - 1) / rate_mbps_;
  }

  void prune(std::uint64_t now)
  {
    if (now >= kPruneHorizon)
      std::erase_if(inflight_, [limit = now - kPruneHorizon](const auto& kv) { return kv.second < limit; });
    prune_at_ = std::max(kPruneThreshold, 2 * inflight_.size());
  }

  DramConfig cfg_;
  std::uint64_t rate_mbps_;
  std::uint64_t per_line_ = 0;
  std::uint64_t next_free_u_ = 0;
  std::size_t prune_at_ = kPruneThreshold;
  std::unordered_map<std::uint64_t, std::uint64_t> inflight_;
  std::vector<DramCounters> counters_;
};

} // namespace tlpsim
