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
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tlpsim/cache.hpp"
#include "tlpsim/metadata.hpp"
#include "tlpsim/perceptron.hpp"
#include "tlpsim/prefetch.hpp"

namespace tlpsim
{

struct PerceptronConfig {
  // index bits per FeatureKind; the two offset features are fixed at 7
  std::array<unsigned, 6> table_bits{10, 10, 10, 7, 10, 7};
  // picked with `tlpsim sweep` on the chase_mix preset
  int tau_high = 20;
  int tau_low = -14;
  int tau_pref = 3;
  int theta_train = 14;

  unsigned bits_for(FeatureKind k) const { return has_fixed_width(k) ? kFixedFeatureBits : table_bits[static_cast<std::size_t>(k)]; }

  // Offending keys; empty when valid.
  std::vector<std::string> problems() const
  {
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < table_bits.size(); ++i)
      if (!has_fixed_width(kAllFeatures[i]) && (table_bits[i] == 0 || table_bits[i] > 24))
        bad.push_back("perceptron.table_bits." + std::string(to_string(kAllFeatures[i])));
    const int lo = static_cast<int>(kAllFeatures.size()) * kWeightMin;
    const int hi = static_cast<int>(kAllFeatures.size()) * kWeightMax;
    auto in_range = [&](int v) { return v >= lo && v <= hi; };
    if (!in_range(tau_high))
      bad.push_back("perceptron.tau_high");
    if (!in_range(tau_low) || tau_low > tau_high)
      bad.push_back("perceptron.tau_low");
    if (!in_range(tau_pref))
      bad.push_back("perceptron.tau_pref");
    if (theta_train < 0 || theta_train > hi)
      bad.push_back("perceptron.theta_train");
    return bad;
  }

  friend bool operator==(const PerceptronConfig&, const PerceptronConfig&) = default;
};

// When the load-side prediction is acted on.
enum class Consume : std::uint8_t { Core, L1dMiss, Selective, Never };

struct PredictorVariant {
  Consume consume_at = Consume::Never;
  bool slp_enabled = false;
  bool slp_leveling = false;

  friend bool operator==(const PredictorVariant&, const PredictorVariant&) = default;
};

enum class VariantName : std::uint8_t { Baseline, Hermes, Flp, Slp, Tsp, DelayedTsp, SelectiveTsp, Tlp };

inline constexpr std::array<VariantName, 8> kAllVariants{
    VariantName::Baseline, VariantName::Hermes,     VariantName::Flp,          VariantName::Slp,
    VariantName::Tsp,      VariantName::DelayedTsp, VariantName::SelectiveTsp, VariantName::Tlp,
};

inline std::string_view to_string(VariantName v)
{
  switch (v) {
  case VariantName::Baseline:
    return "baseline";
  case VariantName::Hermes:
    return "hermes";
  case VariantName::Flp:
    return "flp";
  case VariantName::Slp:
    return "slp";
  case VariantName::Tsp:
    return "tsp";
  case VariantName::DelayedTsp:
    return "delayed_tsp";
  case VariantName::SelectiveTsp:
    return "selective_tsp";
  case VariantName::Tlp:
    return "tlp";
  }
  return "?";
}

inline VariantName parse_variant(std::string_view s)
{
  for (auto v : kAllVariants)
    if (to_string(v) == s)
      return v;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

constexpr PredictorVariant traits(VariantName v)
{
  switch (v) {
  case VariantName::Baseline:
    return {Consume::Never, false, false};
  case VariantName::Hermes:
  case VariantName::Flp:
    return {Consume::Core, false, false};
  case VariantName::Slp:
    return {Consume::Never, true, false};
  case VariantName::Tsp:
    return {Consume::Core, true, false};
  case VariantName::DelayedTsp:
    return {Consume::L1dMiss, true, false};
  case VariantName::SelectiveTsp:
    return {Consume::Selective, true, false};
  case VariantName::Tlp:
    return {Consume::Selective, true, true};
  }
  return {};
}

// FIFO of recently touched page tags; a miss marks the request as the first
// access to its page.
class PageBuffer
{
public:
  static constexpr std::size_t kEntries = 128;
  static constexpr unsigned kTagBits = 40;

  bool contains(std::uint64_t page) const { return std::find(tags_.begin(), tags_.begin() + static_cast<std::ptrdiff_t>(size_), page) != tags_.begin() + static_cast<std::ptrdiff_t>(size_); }

  // Returns the first-access bit and records the page.
  bool touch(std::uint64_t page)
  {
    if (contains(page))
      return false;
    tags_[head_] = page;
    head_ = (head_ + 1) % kEntries;
    size_ = std::min(size_ + 1, kEntries);
    return true;
  }

  std::size_t size() const { return size_; }
  static constexpr std::uint64_t storage_bits() { return kEntries * kTagBits; }

private:
  std::array<std::uint64_t, kEntries> tags_{};
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

struct FlpOutcome {
  FlpDecision decision = FlpDecision::OnChip;
  int confidence = 0;
  RequestMetadata metadata{};
};

// Load-side predictor over virtual addresses.
class FirstLevelPredictor
{
public:
  FirstLevelPredictor(const PerceptronConfig& cfg, std::uint64_t page_size) : cfg_(cfg), page_size_(page_size), perceptron_(make_perceptron(cfg)) {}

  // Updates the page buffer and PC history and snapshots the metadata a
  // Load Queue entry would hold. No weights are read.
  RequestMetadata observe(std::uint64_t pc, std::uint64_t vaddr)
  {
    std::rotate(history_.rbegin(), history_.rbegin() + 1, history_.rend());
    history_[0] = pc;
    RequestMetadata m;
    m.hashed_pc = static_cast<std::uint32_t>(fold_hash(pc, RequestMetadata::kHashedPcBits));
    m.last4_pcs = last4_signature(history_);
    m.first_access = pages_.touch(vaddr / page_size_);
    return m;
  }

  FlpOutcome predict(std::uint64_t pc, std::uint64_t vaddr)
  {
    FlpOutcome out;
    out.metadata = observe(pc, vaddr);
    out.confidence = perceptron_.predict_sum(context(out.metadata, vaddr));
    out.metadata.confidence = RequestMetadata::clamp_confidence(out.confidence);
    out.decision = classify_flp(out.confidence, cfg_.tau_high, cfg_.tau_low);
    return out;
  }

  static FeatureContext context(const RequestMetadata& m, std::uint64_t vaddr) { return {m.hashed_pc, vaddr, m.first_access, m.last4_pcs, false}; }

  bool train(const RequestMetadata& m, std::uint64_t vaddr, bool went_offchip)
  {
    return perceptron_.train(context(m, vaddr), went_offchip, m.confidence, cfg_.theta_train);
  }

  const HashedPerceptron& perceptron() const { return perceptron_; }
  const PerceptronConfig& config() const { return cfg_; }

  static HashedPerceptron make_perceptron(const PerceptronConfig& cfg)
  {
    std::array<unsigned, kLoadFeatures.size()> bits{};
    for (std::size_t i = 0; i < kLoadFeatures.size(); ++i)
      bits[i] = cfg.bits_for(kLoadFeatures[i]);
    return HashedPerceptron(kLoadFeatures, bits);
  }

private:
  PerceptronConfig cfg_;
  std::uint64_t page_size_;
  HashedPerceptron perceptron_;
  PageBuffer pages_;
  std::array<std::uint64_t, 4> history_{};
};

struct SlpOutcome {
  bool issue = true;
  int confidence = 0;
  RequestMetadata metadata{};
};

// Prefetch-side predictor over physical addresses. The trigger load's PC hash
// and history come from its metadata; the leveling feature pairs the
// trigger's off-chip tag with the target's line offset in its page.
class SecondLevelPredictor
{
public:
  SecondLevelPredictor(const PerceptronConfig& cfg, bool leveling, std::uint64_t page_size)
      : cfg_(cfg), page_size_(page_size), perceptron_(make_perceptron(cfg, leveling))
  {
  }

  SlpOutcome filter(const RequestMetadata& trigger, std::uint64_t target_paddr, bool flp_tag)
  {
    SlpOutcome out;
    out.metadata.hashed_pc = trigger.hashed_pc;
    out.metadata.last4_pcs = trigger.last4_pcs;
    out.metadata.first_access = pages_.touch(target_paddr / page_size_);
    out.metadata.prediction = flp_tag;
    out.confidence = perceptron_.predict_sum(context(out.metadata, target_paddr));
    out.metadata.confidence = RequestMetadata::clamp_confidence(out.confidence);
    out.issue = out.confidence < cfg_.tau_pref;
    return out;
  }

  static FeatureContext context(const RequestMetadata& m, std::uint64_t paddr) { return {m.hashed_pc, paddr, m.first_access, m.last4_pcs, m.prediction}; }

  bool train(const RequestMetadata& m, std::uint64_t target_paddr, bool went_offchip)
  {
    return perceptron_.train(context(m, target_paddr), went_offchip, m.confidence, cfg_.theta_train);
  }

  const HashedPerceptron& perceptron() const { return perceptron_; }

  static HashedPerceptron make_perceptron(const PerceptronConfig& cfg, bool leveling)
  {
    std::vector<FeatureKind> features(kLoadFeatures.begin(), kLoadFeatures.end());
    if (leveling)
      features.push_back(FeatureKind::FlpPredPlusCacheLineOffset);
    std::vector<unsigned> bits;
    for (auto f : features)
      bits.push_back(cfg.bits_for(f));
    return HashedPerceptron(features, bits);
  }

private:
  PerceptronConfig cfg_;
  std::uint64_t page_size_;
  HashedPerceptron perceptron_;
  PageBuffer pages_;
};

struct OffchipCounters {
  std::uint64_t predictions = 0;
  std::uint64_t high = 0;
  std::uint64_t delayed = 0;
  std::uint64_t onchip = 0;
  std::uint64_t core_issues = 0;
  std::uint64_t l1d_miss_issues = 0;
  std::uint64_t flp_trainings = 0;
  std::uint64_t flp_true_pos = 0;
  std::uint64_t flp_false_pos = 0;
  std::uint64_t flp_true_neg = 0;
  std::uint64_t flp_false_neg = 0;
  std::uint64_t slp_consulted = 0;
  std::uint64_t slp_dropped = 0;
  std::uint64_t slp_trainings = 0;
};

// Result of consulting the load-side predictor for one demand load.
struct LoadPrediction {
  FlpDecision decision = FlpDecision::OnChip;
  int confidence = 0;
  RequestMetadata metadata{};
  std::optional<std::uint64_t> speculative_at; // issue from the core
  bool flagged = false;                         // issue on L1D miss
  bool flp_tag = false;                         // forwarded to prefetch filtering
};

// Per-core decision logic for one variant. Pure policy: the engine performs
// the DRAM requests and reports outcomes back for training.
class OffchipController
{
public:
  OffchipController(VariantName variant, const PerceptronConfig& cfg, std::uint64_t page_size, unsigned predictor_latency = 6)
      : name_(variant), variant_(traits(variant)), latency_(predictor_latency), flp_(cfg, page_size),
        slp_(cfg, variant_.slp_leveling, page_size)
  {
  }

  LoadPrediction flp_on_load(std::uint64_t pc, std::uint64_t vaddr, std::uint64_t now)
  {
    LoadPrediction p;
    if (variant_.consume_at == Consume::Never) {
      p.metadata = flp_.observe(pc, vaddr);
      return p;
    }
    auto out = flp_.predict(pc, vaddr);
    p.decision = out.decision;
    p.confidence = out.confidence;
    p.metadata = out.metadata;
    p.flp_tag = out.decision != FlpDecision::OnChip;
    ++counters_.predictions;
    switch (out.decision) {
    case FlpDecision::HighOffChip:
      ++counters_.high;
      break;
    case FlpDecision::DelayedOffChip:
      ++counters_.delayed;
      break;
    case FlpDecision::OnChip:
      ++counters_.onchip;
      break;
    }

    const bool offchip = out.decision != FlpDecision::OnChip;
    const bool issue_now = (variant_.consume_at == Consume::Core && offchip)
                           || (variant_.consume_at == Consume::Selective && out.decision == FlpDecision::HighOffChip);
    if (issue_now) {
      p.speculative_at = now + latency_;
      ++counters_.core_issues;
    } else if (offchip && variant_.consume_at != Consume::Core) {
      p.flagged = true;
    }
    return p;
  }

  // `now` is the cycle the L1D miss is known.
  std::optional<std::uint64_t> flp_on_l1d_miss(LoadPrediction& p, std::uint64_t now)
  {
    if (!p.flagged)
      return std::nullopt;
    p.metadata.prediction = true;
    ++counters_.l1d_miss_issues;
    return now + latency_;
  }

  void flp_on_complete(const RequestMetadata& m, std::uint64_t vaddr, Level served, bool predicted_offchip)
  {
    if (variant_.consume_at == Consume::Never)
      return;
    const bool offchip = served == Level::DRAM;
    ++counters_.flp_trainings;
    if (predicted_offchip)
      ++(offchip ? counters_.flp_true_pos : counters_.flp_false_pos);
    else
      ++(offchip ? counters_.flp_false_neg : counters_.flp_true_neg);
    flp_.train(m, vaddr, offchip);
  }

  SlpOutcome slp_filter(const RequestMetadata& trigger, std::uint64_t target_paddr, bool flp_tag)
  {
    if (!variant_.slp_enabled)
      return {true, 0, trigger};
    ++counters_.slp_consulted;
    auto out = slp_.filter(trigger, target_paddr, variant_.slp_leveling && flp_tag);
    if (!out.issue)
      ++counters_.slp_dropped;
    return out;
  }

  void slp_on_prefetch_fill(const RequestMetadata& m, std::uint64_t target_paddr, Level served)
  {
    if (!variant_.slp_enabled)
      return;
    ++counters_.slp_trainings;
    slp_.train(m, target_paddr, served == Level::DRAM);
  }

  VariantName name() const { return name_; }
  const PredictorVariant& variant() const { return variant_; }
  const OffchipCounters& counters() const { return counters_; }
  const FirstLevelPredictor& flp() const { return flp_; }
  const SecondLevelPredictor& slp() const { return slp_; }

private:
  VariantName name_;
  PredictorVariant variant_;
  unsigned latency_;
  FirstLevelPredictor flp_;
  SecondLevelPredictor slp_;
  OffchipCounters counters_;
};

// Per-core storage of the full two-level design.
struct StorageReport {
  std::uint64_t flp_table_bits = 0;
  std::uint64_t flp_page_buffer_bits = 0;
  std::uint64_t slp_table_bits = 0;
  std::uint64_t slp_page_buffer_bits = 0;
  std::uint64_t load_queue_bits = 0;
  std::uint64_t mshr_bits = 0;

  std::uint64_t total_bits() const { return flp_table_bits + flp_page_buffer_bits + slp_table_bits + slp_page_buffer_bits + load_queue_bits + mshr_bits; }
  static double kib(std::uint64_t bits) { return static_cast<double>(bits) / 8.0 / 1024.0; }
};

inline StorageReport storage_of(const PerceptronConfig& cfg, unsigned load_queue_entries = 72, unsigned l1d_mshr_entries = 10)
{
  StorageReport r;
  r.flp_table_bits = FirstLevelPredictor::make_perceptron(cfg).storage_bits();
  r.flp_page_buffer_bits = PageBuffer::storage_bits();
  r.slp_table_bits = SecondLevelPredictor::make_perceptron(cfg, true).storage_bits();
  r.slp_page_buffer_bits = PageBuffer::storage_bits();
  r.load_queue_bits = std::uint64_t{load_queue_entries} * RequestMetadata::kLoadQueueBits;
  r.mshr_bits = std::uint64_t{l1d_mshr_entries} * RequestMetadata::kMshrBits;
  return r;
}

} // namespace tlpsim
