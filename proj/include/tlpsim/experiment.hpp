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
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlpsim/config.hpp"
#include "tlpsim/engine.hpp"
#include "tlpsim/stats.hpp"
#include "tlpsim/trace.hpp"

namespace tlpsim
{

using TracePtr = std::shared_ptr<const std::vector<TraceRecord>>;

struct Job {
  RunInfo info;
  SimConfig config;
  std::vector<TracePtr> traces; // one per core
  SimOptions options{};
};

inline SimStats run_job(const Job& job)
{
  if (job.traces.size() == 1 && job.config.cores == 1)
    return simulate(*job.traces[0], job.config, job.options);
  std::vector<std::span<const TraceRecord>> spans;
  for (const auto& t : job.traces)
    spans.emplace_back(*t);
  SimConfig c = job.config;
  c.cores = static_cast<unsigned>(spans.size());
  return System(c, spans, job.options).run();
}

// Runs jobs on `workers` threads. Results come back in job order, so output
// does not depend on the worker count.
inline std::vector<SimStats> run_jobs(const std::vector<Job>& jobs, unsigned workers = 1)
{
  std::vector<SimStats> results(jobs.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_job(jobs[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };
  if (workers == 1)
    worker();
  else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
  }
  if (failure)
    std::rethrow_exception(failure);
  return results;
}

inline Job make_job(std::string label, std::string trace_name, std::vector<TracePtr> traces, SimConfig cfg, std::string axis = {},
                    std::string axis_value = {})
{
  cfg.cores = static_cast<unsigned>(traces.size());
  Job j;
  j.info = {std::move(label), std::move(trace_name), std::string(to_string(cfg.variant)), std::move(axis), std::move(axis_value), "all",
            config_digest(cfg)};
  j.config = std::move(cfg);
  j.traces = std::move(traces);
  return j;
}

inline std::vector<Job> ablation_jobs(const std::string& trace_name, const std::vector<TracePtr>& traces, const SimConfig& base,
                                      const std::vector<VariantName>& variants)
{
  std::vector<Job> jobs;
  for (auto v : variants) {
    SimConfig c = base;
    c.variant = v;
    jobs.push_back(make_job(std::string(to_string(v)), trace_name, traces, c));
  }
  return jobs;
}

// One job per (value, variant). `axis` is any configuration key.
inline std::vector<Job> sweep_jobs(const std::string& trace_name, const std::vector<TracePtr>& traces, const SimConfig& base,
                                   const std::string& axis, const std::vector<std::string>& values, const std::vector<VariantName>& variants)
{
  const std::string key = detail::canonical_key(axis);
  std::vector<Job> jobs;
  for (const auto& value : values) {
    SimConfig c = base;
    apply_setting(c, key, value);
    c.validate();
    for (auto v : variants) {
      SimConfig cv = c;
      cv.variant = v;
      jobs.push_back(make_job(std::string(to_string(v)) + "@" + key + "=" + value, trace_name, traces, cv, key, value));
    }
  }
  return jobs;
}

inline std::vector<StatsRecord> records_of(const std::vector<Job>& jobs, const std::vector<SimStats>& results)
{
  std::vector<StatsRecord> out;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    for (auto& r : flatten(jobs[i].info, results[i]))
      out.push_back(std::move(r));
  return out;
}

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr const char* kManifestSchema = "tlpsim-manifest/1";

// Describes one invocation's outputs for the plotting step.
struct Manifest {
  std::string kind; // run | ablate | sweep
  std::vector<std::string> traces;
  std::string axis;
  std::vector<std::string> axis_values;
  std::vector<std::string> variants;
  std::string csv;  // relative to the manifest
  std::string json; // relative to the manifest
  nlohmann::ordered_json config;
  std::string config_digest;

  nlohmann::ordered_json to_json() const
  {
    nlohmann::ordered_json j;
    j["schema"] = kManifestSchema;
    j["tool_version"] = kToolVersion;
    j["kind"] = kind;
    j["traces"] = traces;
    j["axis"] = axis;
    j["axis_values"] = axis_values;
    j["variants"] = variants;
    j["csv"] = csv;
    j["json"] = json;
    j["columns"] = stats_columns();
    j["config_digest"] = config_digest;
    j["config"] = config;
    return j;
  }

  static Manifest from_json(const nlohmann::ordered_json& j)
  {
    if (j.value("schema", "") != kManifestSchema)
      throw std::runtime_error("not a tlpsim manifest");
    Manifest m;
    m.kind = j.at("kind").get<std::string>();
    m.traces = j.at("traces").get<std::vector<std::string>>();
    m.axis = j.at("axis").get<std::string>();
    m.axis_values = j.at("axis_values").get<std::vector<std::string>>();
    m.variants = j.at("variants").get<std::vector<std::string>>();
    m.csv = j.at("csv").get<std::string>();
    m.json = j.at("json").get<std::string>();
    m.config = j.at("config");
    m.config_digest = j.at("config_digest").get<std::string>();
    return m;
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out)
    throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes <stem>.csv, <stem>.json and <stem>.manifest.json into `dir`.
inline std::filesystem::path write_outputs(const std::filesystem::path& dir, const std::string& stem, Manifest m,
                                           const std::vector<Job>& jobs, const std::vector<SimStats>& results)
{
  std::filesystem::create_directories(dir);
  const auto records = records_of(jobs, results);
  m.csv = stem + ".csv";
  m.json = stem + ".json";
  write_text(dir / m.csv, to_csv(records));

  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    nlohmann::ordered_json r;
    r["stats"] = to_json(jobs[i].info, results[i]);
    r["config"] = to_json(jobs[i].config);
    runs.push_back(std::move(r));
  }
  write_text(dir / m.json, runs.dump(2) + "\n");
  const auto path = dir / (stem + ".manifest.json");
  write_text(path, m.to_json().dump(2) + "\n");
  return path;
}

} // namespace tlpsim
