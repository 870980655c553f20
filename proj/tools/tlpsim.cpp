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

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlpsim/config.hpp"
#include "tlpsim/engine.hpp"
#include "tlpsim/experiment.hpp"
#include "tlpsim/offchip.hpp"
#include "tlpsim/stats.hpp"
#include "tlpsim/synthetic.hpp"
#include "tlpsim/trace.hpp"
#include "tlpsim/workloads.hpp"

namespace fs = std::filesystem;
using namespace tlpsim;

namespace
{

enum Exit : int { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kInvariant = 5 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_list(const std::vector<std::string>& items)
{
  std::string s;
  for (const auto& i : items)
    s += (s.empty() ? "" : ", ") + i;
  return s;
}

struct Common {
  std::vector<std::string> traces;
  std::string config_file;
  std::vector<std::string> sets;
  std::string variant;
  std::string out_dir;
  unsigned jobs = 1;
  bool no_offchip = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_variant)
{
  cmd->add_option("-t,--trace", c.traces, "trace file (repeat for one per core)")->required();
  cmd->add_option("-c,--config", c.config_file, "INI configuration file");
  cmd->add_option("-s,--set", c.sets, "override, section.key=value (repeatable)");
  if (with_variant)
    cmd->add_option("-v,--variant", c.variant, "predictor variant");
  cmd->add_option("-o,--out-dir", c.out_dir, "output directory (default $TLPSIM_OUT_DIR or .)");
  cmd->add_option("-j,--jobs", c.jobs, "worker threads")->check(CLI::Range(1u, 256u));
}

SimConfig build_config(const Common& c)
{
  SimConfig cfg;
  if (!c.config_file.empty()) {
    if (!fs::exists(c.config_file))
      throw IoError("config file not found: " + c.config_file);
    cfg = load_config_file(c.config_file);
  }
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::string> malformed;
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      malformed.push_back(s);
    else
      settings.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!malformed.empty())
    throw ConfigError(malformed, "expected key=value");
  if (!c.variant.empty())
    settings.emplace_back("offchip.variant", c.variant);
  apply_settings(cfg, settings);
  cfg.cores = static_cast<unsigned>(c.traces.size());
  cfg.validate();
  return cfg;
}

std::vector<TracePtr> load_traces(const std::vector<std::string>& paths)
{
  std::vector<TracePtr> out;
  for (const auto& p : paths) {
    try {
      out.push_back(std::make_shared<const std::vector<TraceRecord>>(read_trace_file(p)));
    } catch (const TraceFormatError& e) {
      throw IoError(p + ": " + e.what());
    } catch (const TraceIoError& e) {
      throw IoError(e.what());
    }
  }
  return out;
}

fs::path out_dir(const std::string& flag)
{
  if (!flag.empty())
    return flag;
  if (const char* env = std::getenv("TLPSIM_OUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return ".";
}

std::string trace_label(const std::vector<std::string>& paths)
{
  std::string s;
  for (const auto& p : paths)
    s += (s.empty() ? "" : "+") + fs::path(p).filename().string();
  return s;
}

std::vector<VariantName> parse_variants(const std::vector<std::string>& names)
{
  std::vector<VariantName> out;
  std::vector<std::string> bad;
  for (const auto& n : names) {
    try {
      out.push_back(parse_variant(n));
    } catch (const std::invalid_argument&) {
      bad.push_back(n);
    }
  }
  if (!bad.empty())
    throw ConfigError({"offchip.variant"}, "unknown variant(s): " + fmt_list(bad));
  return out;
}

std::string fmt_opt(std::optional<double> v, int prec = 3)
{
  if (!v)
    return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << *v;
  return os.str();
}

void print_summary(const std::vector<Job>& jobs, const std::vector<SimStats>& results)
{
  std::cout << std::left << std::setw(36) << "run" << std::right << std::setw(10) << "ipc" << std::setw(10) << "llc_mpki" << std::setw(12)
            << "dram_txn" << std::setw(10) << "spec" << std::setw(10) << "pf_acc" << "\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& s = results[i];
    std::cout << std::left << std::setw(36) << jobs[i].info.label << std::right << std::setw(10) << fmt_opt(s.ipc()) << std::setw(10)
              << fmt_opt(llc_mpki(s), 2) << std::setw(12) << s.dram_transactions() << std::setw(10) << s.speculative_issued << std::setw(10)
              << fmt_opt(prefetch_accuracy(s.l1d_pf)) << "\n";
  }
}

int finish(const std::string& kind, const std::string& stem, const Common& c, const SimConfig& cfg, const std::vector<Job>& jobs,
           const std::vector<SimStats>& results, const std::string& axis = {}, const std::vector<std::string>& values = {})
{
  Manifest m;
  m.kind = kind;
  m.traces = c.traces;
  m.axis = axis;
  m.axis_values = values;
  for (const auto& j : jobs)
    if (std::find(m.variants.begin(), m.variants.end(), j.info.variant) == m.variants.end())
      m.variants.push_back(j.info.variant);
  m.config = to_json(cfg);
  m.config_digest = config_digest(cfg);
  fs::path manifest;
  try {
    manifest = write_outputs(out_dir(c.out_dir), stem, m, jobs, results);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  print_summary(jobs, results);
  std::cout << "manifest: " << manifest.string() << "\n";
  return kOk;
}

int cmd_gen(const std::string& pattern, const SyntheticSpec& base, std::int64_t stride, std::uint64_t footprint, PointerChasePattern chase,
            const std::vector<double>& weights, const std::string& preset, const std::string& out)
{
  SyntheticSpec spec = base;
  if (!preset.empty()) {
    spec = workload_preset(preset, base.record_count, base.seed);
  } else if (pattern == "stream") {
    spec.pattern = StreamPattern{};
  } else if (pattern == "strided") {
    spec.pattern = StridedPattern{stride, footprint};
  } else if (pattern == "chase") {
    if (footprint)
      chase.footprint = footprint;
    spec.pattern = chase;
  } else if (pattern == "mixed") {
    MixedPattern m;
    if (!weights.empty()) {
      if (weights.size() != 3)
        throw SpecError("--weights takes stream,strided,chase");
      m.stream_weight = weights[0];
      m.strided_weight = weights[1];
      m.chase_weight = weights[2];
    }
    m.strided.stride = stride;
    if (footprint)
      chase.footprint = footprint;
    m.chase = chase;
    spec.pattern = m;
  } else {
    throw SpecError("unknown pattern '" + pattern + "'");
  }
  auto records = generate(spec);
  try {
    write_trace_file(out, records);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  std::cout << "wrote " << records.size() << " records (" << instruction_count(records) << " instructions) to " << out << "\n";
  return kOk;
}

int cmd_report(const std::string& manifest_path, const std::string& plotter)
{
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  Manifest m;
  try {
    m = Manifest::from_json(j);
  } catch (const std::exception& e) {
    throw IoError(manifest_path + ": " + e.what());
  }
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<StatsRecord> records;
  try {
    records = from_csv(read_text(dir / m.csv));
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  std::cout << m.kind << ": " << records.size() << " rows, " << m.variants.size() << " variant(s), config " << m.config_digest << "\n";
  for (const auto& r : records) {
    if (r.info.core != "all")
      continue;
    std::cout << "  " << std::left << std::setw(36) << r.info.label << std::right << " ipc " << fmt_opt(r.stats.ipc()) << "  dram "
              << r.stats.dram_transactions() << "\n";
  }
  if (plotter.empty())
    return kOk;
  const std::string cmd = plotter + " \"" + fs::absolute(manifest_path).string() + "\"";
  int rc = std::system(cmd.c_str());
  if (rc != 0) {
    std::cerr << "plotter failed (" << rc << "): " << cmd << "\n";
    return kIo;
  }
  return kOk;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"tlpsim: off-chip prediction memory-hierarchy simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
  SyntheticSpec gspec;
  std::string pattern = "stream", preset, gen_out;
  std::int64_t stride = 256;
  std::uint64_t footprint = 0;
  PointerChasePattern chase;
  std::vector<double> weights;
  gen->add_option("-p,--pattern", pattern, "stream | strided | chase | mixed");
  gen->add_option("--preset", preset, "named workload (" + fmt_list(workload_presets()) + ")");
  gen->add_option("-n,--records", gspec.record_count, "record count")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gspec.seed, "RNG seed");
  gen->add_option("--stride", stride, "strided pattern stride in bytes");
  gen->add_option("--footprint", footprint, "footprint in bytes");
  gen->add_option("--exponent", chase.exponent, "power-law exponent for chase targets");
  gen->add_option("--revisit", chase.revisit, "chance a chase target repeats the previous line");
  gen->add_option("--neighbor", chase.neighbor, "chance a chase target stays in the previous page");
  bool scattered = false;
  gen->add_flag("--scattered", scattered, "place popular chase lines independently of pages");
  gen->add_option("--weights", weights, "mixed weights stream,strided,chase")->delimiter(',');
  gen->add_option("--mean-gap", gspec.mean_gap, "mean non-memory instructions between records");
  gen->add_option("--store-ratio", gspec.store_ratio, "fraction of stores");
  gen->add_option("-o,--out", gen_out, "output trace file")->required();

  Common run_c, abl_c, sw_c;
  auto* run = app.add_subcommand("run", "simulate one configuration");
  add_common(run, run_c, true);
  run->add_flag("--no-offchip", run_c.no_offchip, "remove the off-chip module (baseline only)");

  auto* abl = app.add_subcommand("ablate", "run every predictor variant");
  add_common(abl, abl_c, false);
  std::vector<std::string> abl_variants;
  abl->add_option("--variants", abl_variants, "variants to run (default all)")->delimiter(',');

  auto* sw = app.add_subcommand("sweep", "sweep one configuration key");
  add_common(sw, sw_c, false);
  std::string axis;
  std::vector<std::string> values, sw_variants;
  sw->add_option("--axis", axis, "configuration key")->required();
  sw->add_option("--values", values, "comma-separated values")->delimiter(',')->required();
  sw->add_option("--variants", sw_variants, "variants (default baseline,hermes,tlp)")->delimiter(',');

  auto* rep = app.add_subcommand("report", "summarize a manifest and hand it to the plotter");
  std::string manifest, plotter;
  rep->add_option("-m,--manifest", manifest, "manifest written by run/ablate/sweep")->required()->check(CLI::ExistingFile);
  rep->add_option("--plotter", plotter, "command receiving the manifest path, e.g. 'python3 -m tlpsim_plots'");

  auto* st = app.add_subcommand("storage", "print the predictor storage budget");
  std::string st_config;
  st->add_option("-c,--config", st_config, "INI configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    chase.clustered = !scattered;
    if (*gen)
      return cmd_gen(pattern, gspec, stride, footprint, chase, weights, preset, gen_out);

    if (*run) {
      auto cfg = build_config(run_c);
      if (run_c.no_offchip && cfg.variant != VariantName::Baseline)
        throw ConfigError({"offchip.variant"}, "--no-offchip requires the baseline variant");
      auto traces = load_traces(run_c.traces);
      std::vector<Job> jobs{make_job(std::string(to_string(cfg.variant)), trace_label(run_c.traces), traces, cfg)};
      jobs[0].options.offchip_module = !run_c.no_offchip;
      auto results = run_jobs(jobs, 1);
      return finish("run", "run", run_c, cfg, jobs, results);
    }

    if (*abl) {
      auto cfg = build_config(abl_c);
      auto variants = abl_variants.empty() ? std::vector<VariantName>(kAllVariants.begin(), kAllVariants.end()) : parse_variants(abl_variants);
      auto traces = load_traces(abl_c.traces);
      auto jobs = ablation_jobs(trace_label(abl_c.traces), traces, cfg, variants);
      auto results = run_jobs(jobs, abl_c.jobs);
      return finish("ablate", "ablation", abl_c, cfg, jobs, results);
    }

    if (*sw) {
      auto cfg = build_config(sw_c);
      auto variants = sw_variants.empty() ? std::vector<VariantName>{VariantName::Baseline, VariantName::Hermes, VariantName::Tlp}
                                          : parse_variants(sw_variants);
      auto traces = load_traces(sw_c.traces);
      auto jobs = sweep_jobs(trace_label(sw_c.traces), traces, cfg, axis, values, variants);
      auto results = run_jobs(jobs, sw_c.jobs);
      return finish("sweep", "sweep", sw_c, cfg, jobs, results, detail::canonical_key(axis), values);
    }

    if (*rep)
      return cmd_report(manifest, plotter);

    if (*st) {
      SimConfig cfg = st_config.empty() ? SimConfig{} : load_config_file(st_config);
      cfg.validate();
      auto r = storage_of(cfg.perceptron, cfg.core.load_queue_entries, cfg.l1d.mshr);
      auto line = [](const char* name, std::uint64_t bits) {
        std::cout << std::left << std::setw(22) << name << std::right << std::setw(8) << bits << " bits  " << std::fixed << std::setprecision(3)
                  << StorageReport::kib(bits) << " KiB\n";
      };
      line("flp weight tables", r.flp_table_bits);
      line("flp page buffer", r.flp_page_buffer_bits);
      line("slp weight tables", r.slp_table_bits);
      line("slp page buffer", r.slp_page_buffer_bits);
      line("load queue metadata", r.load_queue_bits);
      line("l1d mshr metadata", r.mshr_bits);
      line("total", r.total_bits());
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const SpecError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
