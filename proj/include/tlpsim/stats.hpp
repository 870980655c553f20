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
#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlpsim/cache.hpp"
#include "tlpsim/dram.hpp"
#include "tlpsim/offchip.hpp"

namespace tlpsim
{

class MetricError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

struct LevelCounters {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

// Indexed by Level.
using PerLevel = std::array<std::uint64_t, 4>;

struct PrefetchCounters {
  std::uint64_t emitted = 0;   // produced by the prefetcher
  std::uint64_t dropped = 0;   // filtered before MSHR allocation
  std::uint64_t issued = 0;    // passed the filter
  std::uint64_t redundant = 0; // target already resident
  std::uint64_t filled = 0;
  std::uint64_t useful = 0;  // demand hit on a prefetched line
  std::uint64_t useless = 0; // evicted before any demand
  PerLevel filled_from{};
  PerLevel useful_from{};
  PerLevel useless_from{};
};

struct SimStats {
  std::uint64_t instructions = 0;
  std::uint64_t cycles = 0;
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t load_latency_sum = 0;

  LevelCounters l1d, l2, llc;
  PerLevel demand_served{};

  DramCounters dram{};

  std::uint64_t speculative_issued = 0;
  PerLevel speculative_location{}; // where the regular request was served
  std::uint64_t speculative_useful = 0; // regular request found it in flight or done

  PrefetchCounters l1d_pf, l2_pf;
  OffchipCounters offchip{};

  // Multi-core runs: one entry per core; the top-level object aggregates.
  std::vector<SimStats> per_core;

  double ipc() const
  {
    if (cycles == 0)
      throw MetricError("IPC undefined with zero cycles");
    return static_cast<double>(instructions) / static_cast<double>(cycles);
  }

  // Off-chip transactions, writebacks included.
  std::uint64_t dram_transactions() const { return dram.reads() + dram.writebacks; }
};

inline double mpki(std::uint64_t misses, std::uint64_t instructions)
{
  if (instructions == 0)
    throw MetricError("MPKI undefined with zero instructions");
  return static_cast<double>(misses) * 1000.0 / static_cast<double>(instructions);
}

inline double llc_mpki(const SimStats& s) { return mpki(s.llc.misses, s.instructions); }

// Useful over filled; undefined when nothing was filled.
inline std::optional<double> prefetch_accuracy(const PrefetchCounters& p)
{
  if (p.filled == 0)
    return std::nullopt;
  return static_cast<double>(p.useful) / static_cast<double>(p.filled);
}

// Relative change in off-chip transactions against a baseline run.
inline double dram_delta(const SimStats& run, const SimStats& base)
{
  if (base.dram_transactions() == 0)
    throw MetricError("baseline has no DRAM transactions");
  return (static_cast<double>(run.dram_transactions()) - static_cast<double>(base.dram_transactions()))
         / static_cast<double>(base.dram_transactions());
}

inline double speedup(const SimStats& run, const SimStats& base) { return run.ipc() / base.ipc(); }

// Sum over cores of IPC_shared / IPC_alone for the technique, normalized by
// the same sum for the baseline.
inline double weighted_speedup(std::span<const double> ipc_shared, std::span<const double> ipc_alone, std::span<const double> base_shared,
                               std::span<const double> base_alone)
{
  const std::size_t n = ipc_shared.size();
  if (n == 0 || ipc_alone.size() != n || base_shared.size() != n || base_alone.size() != n)
    throw MetricError("weighted speedup needs one value per core in every series");
  double tech = 0, base = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ipc_alone[i] > 0) || !(base_alone[i] > 0))
      throw MetricError("weighted speedup needs positive stand-alone IPC");
    tech += ipc_shared[i] / ipc_alone[i];
    base += base_shared[i] / base_alone[i];
  }
  if (!(base > 0))
    throw MetricError("baseline weighted speedup is zero");
  return tech / base;
}

// ---- tabular export -------------------------------------------------------

// A column value: counter, real, real that may be undefined, or text.
using Cell = std::variant<std::uint64_t, double, std::optional<double>, std::string>;

inline std::string format_double(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_cell(const Cell& c)
{
  struct V {
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(const std::optional<double>& v) const { return v ? format_double(*v) : std::string{}; }
    std::string operator()(const std::string& v) const { return v; }
  };
  return std::visit(V{}, c);
}

// Identifies a row in an exported table.
struct RunInfo {
  std::string label;      // free-form run name
  std::string trace;      // trace file or workload name
  std::string variant;
  std::string axis;       // sweep axis, empty for plain runs
  std::string axis_value;
  std::string core;       // "all" or a core index
  std::string config_digest;

  friend bool operator==(const RunInfo&, const RunInfo&) = default;
};

namespace detail
{
inline const std::vector<std::pair<std::string, std::function<std::uint64_t&(SimStats&)>>>& counter_columns()
{
  using Ref = std::function<std::uint64_t&(SimStats&)>;
  static const auto cols = [] {
    std::vector<std::pair<std::string, Ref>> c;
    c.emplace_back("instructions", [](SimStats& s) -> std::uint64_t& { return s.instructions; });
    c.emplace_back("cycles", [](SimStats& s) -> std::uint64_t& { return s.cycles; });
    c.emplace_back("loads", [](SimStats& s) -> std::uint64_t& { return s.loads; });
    c.emplace_back("stores", [](SimStats& s) -> std::uint64_t& { return s.stores; });
    c.emplace_back("load_latency_sum", [](SimStats& s) -> std::uint64_t& { return s.load_latency_sum; });
    auto level = [&c](const std::string& name, LevelCounters SimStats::*m) {
      c.emplace_back(name + "_accesses", [m](SimStats& s) -> std::uint64_t& { return (s.*m).accesses; });
      c.emplace_back(name + "_hits", [m](SimStats& s) -> std::uint64_t& { return (s.*m).hits; });
      c.emplace_back(name + "_misses", [m](SimStats& s) -> std::uint64_t& { return (s.*m).misses; });
    };
    level("l1d", &SimStats::l1d);
    level("l2", &SimStats::l2);
    level("llc", &SimStats::llc);
    auto per_level = [&c](const std::string& prefix, auto getter) {
      for (unsigned l = 0; l < 4; ++l) {
        std::string lv = to_string(static_cast<Level>(l));
        for (auto& ch : lv)
          ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        c.emplace_back(prefix + "_" + lv, [getter, l](SimStats& s) -> std::uint64_t& { return getter(s)[l]; });
      }
    };
    per_level("served", [](SimStats& s) -> PerLevel& { return s.demand_served; });

    auto dram = [&c](const std::string& name, std::uint64_t DramCounters::*m) {
      c.emplace_back("dram_" + name, [m](SimStats& s) -> std::uint64_t& { return s.dram.*m; });
    };
    dram("demand_reads", &DramCounters::demand_reads);
    dram("prefetch_reads", &DramCounters::prefetch_reads);
    dram("speculative_reads", &DramCounters::speculative_reads);
    dram("merged_demand", &DramCounters::merged_demand);
    dram("merged_prefetch", &DramCounters::merged_prefetch);
    dram("merged_speculative", &DramCounters::merged_speculative);
    dram("writebacks", &DramCounters::writebacks);
    dram("queue_cycles", &DramCounters::queue_cycles);

    c.emplace_back("spec_issued", [](SimStats& s) -> std::uint64_t& { return s.speculative_issued; });
    per_level("spec_served", [](SimStats& s) -> PerLevel& { return s.speculative_location; });
    c.emplace_back("spec_useful", [](SimStats& s) -> std::uint64_t& { return s.speculative_useful; });

    auto pf = [&c, &per_level](const std::string& name, PrefetchCounters SimStats::*m) {
      auto field = [&c, &name, m](const std::string& f, std::uint64_t PrefetchCounters::*fm) {
        c.emplace_back(name + "_" + f, [m, fm](SimStats& s) -> std::uint64_t& { return (s.*m).*fm; });
      };
      field("emitted", &PrefetchCounters::emitted);
      field("dropped", &PrefetchCounters::dropped);
      field("issued", &PrefetchCounters::issued);
      field("redundant", &PrefetchCounters::redundant);
      field("filled", &PrefetchCounters::filled);
      field("useful", &PrefetchCounters::useful);
      field("useless", &PrefetchCounters::useless);
      per_level(name + "_filled_from", [m](SimStats& s) -> PerLevel& { return (s.*m).filled_from; });
      per_level(name + "_useful_from", [m](SimStats& s) -> PerLevel& { return (s.*m).useful_from; });
      per_level(name + "_useless_from", [m](SimStats& s) -> PerLevel& { return (s.*m).useless_from; });
    };
    pf("l1d_pf", &SimStats::l1d_pf);
    pf("l2_pf", &SimStats::l2_pf);

    auto oc = [&c](const std::string& name, std::uint64_t OffchipCounters::*m) {
      c.emplace_back("offchip_" + name, [m](SimStats& s) -> std::uint64_t& { return s.offchip.*m; });
    };
    oc("predictions", &OffchipCounters::predictions);
    oc("high", &OffchipCounters::high);
    oc("delayed", &OffchipCounters::delayed);
    oc("onchip", &OffchipCounters::onchip);
    oc("core_issues", &OffchipCounters::core_issues);
    oc("l1d_miss_issues", &OffchipCounters::l1d_miss_issues);
    oc("flp_trainings", &OffchipCounters::flp_trainings);
    oc("flp_true_pos", &OffchipCounters::flp_true_pos);
    oc("flp_false_pos", &OffchipCounters::flp_false_pos);
    oc("flp_true_neg", &OffchipCounters::flp_true_neg);
    oc("flp_false_neg", &OffchipCounters::flp_false_neg);
    oc("slp_consulted", &OffchipCounters::slp_consulted);
    oc("slp_dropped", &OffchipCounters::slp_dropped);
    oc("slp_trainings", &OffchipCounters::slp_trainings);
    return c;
  }();
  return cols;
}
} // namespace detail

inline std::vector<std::string> info_columns() { return {"label", "trace", "variant", "axis", "axis_value", "core", "config_digest"}; }

inline std::vector<std::string> derived_columns() { return {"ipc", "llc_mpki", "l1d_pf_accuracy", "l2_pf_accuracy", "dram_transactions", "dram_reads"}; }

// Stable column order of every exported table.
inline std::vector<std::string> stats_columns()
{
  auto cols = info_columns();
  for (const auto& [name, _] : detail::counter_columns())
    cols.push_back(name);
  for (auto& d : derived_columns())
    cols.push_back(d);
  return cols;
}

inline std::vector<Cell> stats_row(const RunInfo& info, const SimStats& s)
{
  std::vector<Cell> row{info.label, info.trace, info.variant, info.axis, info.axis_value, info.core, info.config_digest};
  auto& mut = const_cast<SimStats&>(s);
  for (const auto& [_, ref] : detail::counter_columns())
    row.emplace_back(ref(mut));
  row.emplace_back(s.cycles ? std::optional<double>(s.ipc()) : std::nullopt);
  row.emplace_back(s.instructions ? std::optional<double>(llc_mpki(s)) : std::nullopt);
  row.emplace_back(prefetch_accuracy(s.l1d_pf));
  row.emplace_back(prefetch_accuracy(s.l2_pf));
  row.emplace_back(s.dram_transactions());
  row.emplace_back(s.dram.reads());
  return row;
}

namespace detail
{
inline std::string csv_escape(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"')
        quoted = false;
      else
        cur += ch;
    } else if (ch == '"')
      quoted = true;
    else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else
      cur += ch;
  }
  out.push_back(cur);
  return out;
}
} // namespace detail

struct StatsRecord {
  RunInfo info;
  SimStats stats;

  friend bool operator==(const StatsRecord& a, const StatsRecord& b)
  {
    return a.info == b.info && stats_row(a.info, a.stats) == stats_row(b.info, b.stats);
  }
};

// Per-core rows follow their aggregate row.
inline std::vector<StatsRecord> flatten(const RunInfo& info, const SimStats& s)
{
  std::vector<StatsRecord> out;
  RunInfo top = info;
  if (top.core.empty())
    top.core = "all";
  out.push_back({top, s});
  out.back().stats.per_core.clear();
  for (std::size_t i = 0; i < s.per_core.size(); ++i) {
    RunInfo ci = info;
    ci.core = std::to_string(i);
    out.push_back({ci, s.per_core[i]});
  }
  return out;
}

inline std::string to_csv(std::span<const StatsRecord> records)
{
  std::ostringstream os;
  const auto cols = stats_columns();
  for (std::size_t i = 0; i < cols.size(); ++i)
    os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : records) {
    auto row = stats_row(r.info, r.stats);
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << detail::csv_escape(format_cell(row[i]));
    os << "\n";
  }
  return os.str();
}

class StatsParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Inverse of to_csv. Derived columns are recomputed, not trusted.
inline std::vector<StatsRecord> from_csv(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw StatsParseError("empty stats table");
  const auto header = detail::csv_split(line);
  if (header != stats_columns())
    throw StatsParseError("stats table header does not match this build's column set");
  const auto& counters = detail::counter_columns();
  const std::size_t info_n = info_columns().size();
  std::vector<StatsRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    auto cells = detail::csv_split(line);
    if (cells.size() != header.size())
      throw StatsParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " cells");
    StatsRecord r;
    r.info = {cells[0], cells[1], cells[2], cells[3], cells[4], cells[5], cells[6]};
    for (std::size_t i = 0; i < counters.size(); ++i) {
      const auto& cell = cells[info_n + i];
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw StatsParseError("line " + std::to_string(lineno) + ": bad value in column " + counters[i].first);
      counters[i].second(r.stats) = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const RunInfo& info, const SimStats& s)
{
  nlohmann::ordered_json j;
  const auto cols = stats_columns();
  const auto row = stats_row(info, s);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::optional<double>>) {
            if (v)
              j[cols[i]] = *v;
            else
              j[cols[i]] = nullptr;
          } else
            j[cols[i]] = v;
        },
        row[i]);
  }
  if (!s.per_core.empty()) {
    auto& arr = j["per_core"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < s.per_core.size(); ++c) {
      RunInfo ci = info;
      ci.core = std::to_string(c);
      arr.push_back(to_json(ci, s.per_core[c]));
    }
  }
  return j;
}

inline SimStats stats_from_json(const nlohmann::ordered_json& j)
{
  SimStats s;
  for (const auto& [name, ref] : detail::counter_columns())
    ref(s) = j.at(name).get<std::uint64_t>();
  if (j.contains("per_core"))
    for (const auto& c : j.at("per_core"))
      s.per_core.push_back(stats_from_json(c));
  return s;
}

} // namespace tlpsim
