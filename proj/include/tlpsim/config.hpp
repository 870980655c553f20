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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "tlpsim/cache.hpp"
#include "tlpsim/dram.hpp"
#include "tlpsim/offchip.hpp"
#include "tlpsim/prefetch.hpp"

namespace tlpsim
{

class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(std::vector<std::string> keys, const std::string& detail = {})
      : std::runtime_error(format(keys, detail)), keys_(std::move(keys))
  {
  }
  const std::vector<std::string>& keys() const { return keys_; }

private:
  static std::string format(const std::vector<std::string>& keys, const std::string& detail)
  {
    std::string msg = "invalid configuration key(s):";
    for (const auto& k : keys)
      msg += " " + k;
    if (!detail.empty())
      msg += " (" + detail + ")";
    return msg;
  }
  std::vector<std::string> keys_;
};

struct CoreConfig {
  unsigned window = 16;          // concurrent memory ops
  unsigned width = 4;            // non-memory instructions per cycle
  unsigned predictor_latency = 6;
  unsigned load_queue_entries = 72;

  friend bool operator==(const CoreConfig&, const CoreConfig&) = default;
};

struct PrefetchConfig {
  L1dPrefetcherKind l1d = L1dPrefetcherKind::IpStride;
  unsigned l1d_degree = 4;
  bool l1d_next_line_fallback = true;
  L2PrefetcherKind l2 = L2PrefetcherKind::Stream;
  unsigned l2_degree = 2;

  friend bool operator==(const PrefetchConfig&, const PrefetchConfig&) = default;
};

// Defaults follow a Cascade Lake-like core: 32 KB/8-way/4cc L1D, 1 MB/16-way/
// 10cc L2, 1.375 MB-per-core/11-way LLC, 72-cycle DRAM at 12.8 GB/s per core.
struct SimConfig {
  CacheGeometry l1d{32 * 1024, 8, 4, 10};
  CacheGeometry l2{1024 * 1024, 16, 10, 16};
  CacheGeometry llc{1408 * 1024, 11, 36, 64}; // per core
  std::uint32_t llc_store_latency = 56;
  DramConfig dram{};
  PrefetchConfig prefetch{};
  PerceptronConfig perceptron{};
  VariantName variant = VariantName::Baseline;
  CoreConfig core{};
  unsigned cores = 1;
  std::uint64_t page_size = 4096;
  std::uint64_t page_seed = 0;

  std::vector<std::string> problems() const
  {
    std::vector<std::string> bad;
    auto check_cache = [&](const CacheGeometry& g, const std::string& name) {
      if (g.capacity == 0 || g.ways == 0 || g.capacity % (std::uint64_t{g.ways} * kLineSize) != 0) {
        bad.push_back(name + ".size_kb");
        bad.push_back(name + ".ways");
      }
      if (g.latency == 0)
        bad.push_back(name + ".latency");
      if (g.mshr == 0)
        bad.push_back(name + ".mshr");
    };
    check_cache(l1d, "l1d");
    check_cache(l2, "l2");
    check_cache(llc, "llc");
    if (llc_store_latency == 0)
      bad.push_back("llc.store_latency");
    if (dram.service_latency == 0)
      bad.push_back("dram.latency");
    if (!(dram.bandwidth_gbps > 0.0) || std::llround(dram.bandwidth_gbps * 1000.0) == 0)
      bad.push_back("dram.bandwidth_gbps");
    if (dram.core_mhz == 0)
      bad.push_back("dram.core_mhz");
    if (prefetch.l1d_degree == 0 || prefetch.l1d_degree > 16)
      bad.push_back("prefetch.l1d_degree");
    if (prefetch.l2_degree == 0 || prefetch.l2_degree > 16)
      bad.push_back("prefetch.l2_degree");
    for (auto& k : perceptron.problems())
      bad.push_back(k);
    if (core.window == 0)
      bad.push_back("core.window");
    if (core.width == 0)
      bad.push_back("core.width");
    if (core.load_queue_entries == 0)
      bad.push_back("core.load_queue_entries");
    if (cores == 0 || cores > 64)
      bad.push_back("core.cores");
    if (page_size < 64 || (page_size & (page_size - 1)) != 0)
      bad.push_back("core.page_size");
    return bad;
  }

  void validate() const
  {
    if (auto bad = problems(); !bad.empty())
      throw ConfigError(bad);
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

namespace detail
{
template <typename T>
T parse_number(std::string_view key, std::string_view text)
{
  T value{};
  auto trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.remove_prefix(1);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
    trimmed.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size())
    throw ConfigError({std::string(key)}, "cannot parse '" + std::string(text) + "'");
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text)
{
  if (text == "true" || text == "1" || text == "yes" || text == "on")
    return true;
  if (text == "false" || text == "0" || text == "no" || text == "off")
    return false;
  throw ConfigError({std::string(key)}, "expected a boolean, got '" + std::string(text) + "'");
}

inline std::uint64_t parse_size_kb(std::string_view key, std::string_view text)
{
  double kb = parse_number<double>(key, text);
  if (!(kb > 0))
    throw ConfigError({std::string(key)}, "size must be positive");
  return static_cast<std::uint64_t>(std::llround(kb * 1024.0));
}

inline std::string format_kb(std::uint64_t bytes)
{
  std::ostringstream os;
  if (bytes % 1024 == 0)
    os << bytes / 1024;
  else
    os << static_cast<double>(bytes) / 1024.0;
  return os.str();
}

using Setter = std::function<void(SimConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const SimConfig&)>;

struct KeyBinding {
  Setter set;
  Getter get;
};

inline std::string fmt_double(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline const std::map<std::string, KeyBinding, std::less<>>& key_table()
{
  static const auto table = [] {
    std::map<std::string, KeyBinding, std::less<>> t;
    auto cache_keys = [&t](const std::string& name, CacheGeometry SimConfig::*member) {
      t[name + ".size_kb"] = {[member](SimConfig& c, auto k, auto v) { (c.*member).capacity = parse_size_kb(k, v); },
                              [member](const SimConfig& c) { return format_kb((c.*member).capacity); }};
      t[name + ".ways"] = {[member](SimConfig& c, auto k, auto v) { (c.*member).ways = parse_number<std::uint32_t>(k, v); },
                           [member](const SimConfig& c) { return std::to_string((c.*member).ways); }};
      t[name + ".latency"] = {[member](SimConfig& c, auto k, auto v) { (c.*member).latency = parse_number<std::uint32_t>(k, v); },
                              [member](const SimConfig& c) { return std::to_string((c.*member).latency); }};
      t[name + ".mshr"] = {[member](SimConfig& c, auto k, auto v) { (c.*member).mshr = parse_number<std::uint32_t>(k, v); },
                           [member](const SimConfig& c) { return std::to_string((c.*member).mshr); }};
    };
    cache_keys("l1d", &SimConfig::l1d);
    cache_keys("l2", &SimConfig::l2);
    cache_keys("llc", &SimConfig::llc);

    auto uint_key = [&t](const std::string& key, auto accessor) {
      t[key] = {[accessor](SimConfig& c, auto k, auto v) { accessor(c) = parse_number<std::remove_reference_t<decltype(accessor(c))>>(k, v); },
                [accessor](const SimConfig& c) { return std::to_string(accessor(const_cast<SimConfig&>(c))); }};
    };
    uint_key("llc.store_latency", [](SimConfig& c) -> std::uint32_t& { return c.llc_store_latency; });
    uint_key("dram.latency", [](SimConfig& c) -> std::uint32_t& { return c.dram.service_latency; });
    uint_key("dram.core_mhz", [](SimConfig& c) -> std::uint32_t& { return c.dram.core_mhz; });
    t["dram.bandwidth_gbps"] = {[](SimConfig& c, auto k, auto v) { c.dram.bandwidth_gbps = parse_number<double>(k, v); },
                                [](const SimConfig& c) { return fmt_double(c.dram.bandwidth_gbps); }};

    uint_key("core.cores", [](SimConfig& c) -> unsigned& { return c.cores; });
    uint_key("core.window", [](SimConfig& c) -> unsigned& { return c.core.window; });
    uint_key("core.width", [](SimConfig& c) -> unsigned& { return c.core.width; });
    uint_key("core.predictor_latency", [](SimConfig& c) -> unsigned& { return c.core.predictor_latency; });
    uint_key("core.load_queue_entries", [](SimConfig& c) -> unsigned& { return c.core.load_queue_entries; });
    uint_key("core.page_size", [](SimConfig& c) -> std::uint64_t& { return c.page_size; });
    uint_key("core.page_seed", [](SimConfig& c) -> std::uint64_t& { return c.page_seed; });

    t["prefetch.l1d_prefetcher"] = {[](SimConfig& c, auto k, auto v) {
                                      try {
                                        c.prefetch.l1d = parse_l1d_prefetcher(v);
                                      } catch (const std::invalid_argument& e) {
                                        throw ConfigError({std::string(k)}, e.what());
                                      }
                                    },
                                    [](const SimConfig& c) { return std::string(to_string(c.prefetch.l1d)); }};
    t["prefetch.l2_prefetcher"] = {[](SimConfig& c, auto k, auto v) {
                                     try {
                                       c.prefetch.l2 = parse_l2_prefetcher(v);
                                     } catch (const std::invalid_argument& e) {
                                       throw ConfigError({std::string(k)}, e.what());
                                     }
                                   },
                                   [](const SimConfig& c) { return std::string(to_string(c.prefetch.l2)); }};
    uint_key("prefetch.l1d_degree", [](SimConfig& c) -> unsigned& { return c.prefetch.l1d_degree; });
    uint_key("prefetch.l2_degree", [](SimConfig& c) -> unsigned& { return c.prefetch.l2_degree; });
    t["prefetch.l1d_next_line_fallback"] = {[](SimConfig& c, auto k, auto v) { c.prefetch.l1d_next_line_fallback = parse_bool(k, v); },
                                            [](const SimConfig& c) { return std::string(c.prefetch.l1d_next_line_fallback ? "true" : "false"); }};

    auto int_key = [&t](const std::string& key, int PerceptronConfig::*member) {
      t[key] = {[member](SimConfig& c, auto k, auto v) { c.perceptron.*member = parse_number<int>(k, v); },
                [member](const SimConfig& c) { return std::to_string(c.perceptron.*member); }};
    };
    int_key("perceptron.tau_high", &PerceptronConfig::tau_high);
    int_key("perceptron.tau_low", &PerceptronConfig::tau_low);
    int_key("perceptron.tau_pref", &PerceptronConfig::tau_pref);
    int_key("perceptron.theta_train", &PerceptronConfig::theta_train);
    for (std::size_t i = 0; i < kAllFeatures.size(); ++i) {
      if (has_fixed_width(kAllFeatures[i]))
        continue;
      t["perceptron.table_bits." + std::string(to_string(kAllFeatures[i]))] = {
          [i](SimConfig& c, auto k, auto v) { c.perceptron.table_bits[i] = parse_number<unsigned>(k, v); },
          [i](const SimConfig& c) { return std::to_string(c.perceptron.table_bits[i]); }};
    }

    t["offchip.variant"] = {[](SimConfig& c, auto k, auto v) {
                              try {
                                c.variant = parse_variant(v);
                              } catch (const std::invalid_argument& e) {
                                throw ConfigError({std::string(k)}, e.what());
                              }
                            },
                            [](const SimConfig& c) { return std::string(to_string(c.variant)); }};
    return t;
  }();
  return table;
}

// Short aliases accepted on the command line and in files.
inline std::string canonical_key(std::string_view key)
{
  static const std::map<std::string, std::string, std::less<>> aliases{
      {"variant", "offchip.variant"},
      {"tau_high", "perceptron.tau_high"},
      {"tau_low", "perceptron.tau_low"},
      {"tau_pref", "perceptron.tau_pref"},
      {"theta_train", "perceptron.theta_train"},
      {"l1d_prefetcher", "prefetch.l1d_prefetcher"},
      {"l2_prefetcher", "prefetch.l2_prefetcher"},
      {"degree", "prefetch.l1d_degree"},
      {"dram_bw", "dram.bandwidth_gbps"},
      {"cores", "core.cores"},
  };
  if (auto it = aliases.find(key); it != aliases.end())
    return it->second;
  return std::string(key);
}
} // namespace detail

inline std::vector<std::string> config_keys()
{
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::key_table())
    keys.push_back(k);
  return keys;
}

inline void apply_setting(SimConfig& cfg, std::string_view key, std::string_view value)
{
  const std::string canon = detail::canonical_key(key);
  const auto& table = detail::key_table();
  auto it = table.find(canon);
  if (it == table.end())
    throw ConfigError({std::string(key)}, "unknown key");
  it->second.set(cfg, canon, value);
}

inline std::string get_setting(const SimConfig& cfg, std::string_view key)
{
  const std::string canon = detail::canonical_key(key);
  const auto& table = detail::key_table();
  auto it = table.find(canon);
  if (it == table.end())
    throw ConfigError({std::string(key)}, "unknown key");
  return it->second.get(cfg);
}

// Applies every setting, collecting all offending keys before failing.
inline void apply_settings(SimConfig& cfg, const std::vector<std::pair<std::string, std::string>>& settings)
{
  std::vector<std::string> bad;
  std::string detail;
  for (const auto& [k, v] : settings) {
    try {
      apply_setting(cfg, k, v);
    } catch (const ConfigError& e) {
      bad.insert(bad.end(), e.keys().begin(), e.keys().end());
      if (detail.empty())
        detail = e.what();
    }
  }
  if (!bad.empty())
    throw ConfigError(bad, detail);
}

// Sectioned `key = value` text. Keys outside a section use their full dotted
// name (`perceptron.tau_high = 8`) or a short alias (`tau_high = 8`).
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text)
{
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({"<syntax>"}, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      out.emplace_back(section, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node)
      out.emplace_back(section + "." + key, leaf.data());
  }
  return out;
}

inline SimConfig load_config_text(const std::string& text, SimConfig base = {})
{
  apply_settings(base, parse_config_text(text));
  return base;
}

inline SimConfig load_config_file(const std::filesystem::path& path, SimConfig base = {})
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), std::move(base));
}

// Canonical serialization: every key, grouped by section, sorted. Loading it
// reproduces the config exactly.
inline std::string to_config_text(const SimConfig& cfg)
{
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [key, binding] : detail::key_table()) {
    auto dot = key.find('.');
    sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), binding.get(cfg));
  }
  std::ostringstream os;
  for (const auto& [section, entries] : sections) {
    os << "[" << section << "]\n";
    for (const auto& [k, v] : entries)
      os << k << " = " << v << "\n";
    os << "\n";
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const SimConfig& cfg)
{
  nlohmann::ordered_json j;
  for (const auto& [key, binding] : detail::key_table())
    j[key] = binding.get(cfg);
  return j;
}

inline SimConfig config_from_json(const nlohmann::ordered_json& j)
{
  SimConfig cfg;
  std::vector<std::pair<std::string, std::string>> settings;
  for (const auto& [k, v] : j.items())
    settings.emplace_back(k, v.get<std::string>());
  apply_settings(cfg, settings);
  return cfg;
}

// FNV-1a over the canonical text; embedded in every stats row.
inline std::string config_digest(const SimConfig& cfg)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_config_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

} // namespace tlpsim
