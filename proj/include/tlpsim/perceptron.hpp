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
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tlpsim
{

/*
 * Hashed perceptron shared by the load-side and prefetch-side off-chip
 * predictors. Each program feature hashes into its own table of 5-bit
 * saturating weights; the prediction confidence is the sum of the indexed
 * weights. Training nudges every indexed weight toward the observed outcome
 * when the prediction was wrong or not confident enough.
 */

inline constexpr int kWeightMin = -16;
inline constexpr int kWeightMax = 15;
inline constexpr unsigned kWeightBits = 5;

enum class FeatureKind : std::uint8_t {
  PcXorCacheLineOffset,
  PcXorByteOffset,
  PcPlusFirstAccess,
  CacheLineOffsetPlusFirstAccess,
  Last4LoadPcs,
  FlpPredPlusCacheLineOffset,
};

inline constexpr std::array<FeatureKind, 6> kAllFeatures{
    FeatureKind::PcXorCacheLineOffset,           FeatureKind::PcXorByteOffset, FeatureKind::PcPlusFirstAccess,
    FeatureKind::CacheLineOffsetPlusFirstAccess, FeatureKind::Last4LoadPcs,    FeatureKind::FlpPredPlusCacheLineOffset,
};

// Load-side predictor features; the prefetch-side predictor may add the
// leveling feature on top.
inline constexpr std::array<FeatureKind, 5> kLoadFeatures{
    FeatureKind::PcXorCacheLineOffset, FeatureKind::PcXorByteOffset, FeatureKind::PcPlusFirstAccess,
    FeatureKind::CacheLineOffsetPlusFirstAccess, FeatureKind::Last4LoadPcs,
};

inline std::string_view to_string(FeatureKind k)
{
  switch (k) {
  case FeatureKind::PcXorCacheLineOffset:
    return "pc_xor_cl_offset";
  case FeatureKind::PcXorByteOffset:
    return "pc_xor_byte_offset";
  case FeatureKind::PcPlusFirstAccess:
    return "pc_first_access";
  case FeatureKind::CacheLineOffsetPlusFirstAccess:
    return "cl_offset_first_access";
  case FeatureKind::Last4LoadPcs:
    return "last4_pcs";
  case FeatureKind::FlpPredPlusCacheLineOffset:
    return "flp_pred_cl_offset";
  }
  return "?";
}

// Offset features index a fixed 7-bit table.
constexpr bool has_fixed_width(FeatureKind k)
{
  return k == FeatureKind::CacheLineOffsetPlusFirstAccess || k == FeatureKind::FlpPredPlusCacheLineOffset;
}

inline constexpr unsigned kFixedFeatureBits = 7;

// XOR-fold `value` into `bits` bits.
constexpr std::uint64_t fold_hash(std::uint64_t value, unsigned bits)
{
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t acc = 0;
  while (value != 0) {
    acc ^= value & mask;
    value >>= bits;
  }
  return acc;
}

// Compresses the last four load PCs (most recent first) into the 10-bit
// signature kept in request metadata.
inline constexpr unsigned kLast4SignatureBits = 10;

constexpr std::uint16_t last4_signature(std::span<const std::uint64_t, 4> pcs)
{
  std::uint64_t mix = pcs[0] ^ std::rotl(pcs[1], 1) ^ std::rotl(pcs[2], 2) ^ std::rotl(pcs[3], 3);
  return static_cast<std::uint16_t>(fold_hash(mix, kLast4SignatureBits));
}

// Inputs to every feature. `pc` is the 32-bit hashed PC stored in request
// metadata so that training can rebuild the exact prediction-time context.
// `addr` is virtual for the load-side predictor and physical for the
// prefetch-side one.
struct FeatureContext {
  std::uint64_t pc = 0;
  std::uint64_t addr = 0;
  bool first_access = false;
  std::uint16_t last4 = 0;
  bool flp_pred = false;

  std::uint64_t cacheline_offset() const { return (addr >> 6) & 0x3F; }
  std::uint64_t byte_offset() const { return addr & 0x3F; }

  friend bool operator==(const FeatureContext&, const FeatureContext&) = default;
};

constexpr std::uint64_t feature_index(FeatureKind kind, const FeatureContext& ctx, unsigned table_bits)
{
  const std::uint64_t mask = (std::uint64_t{1} << table_bits) - 1;
  switch (kind) {
  case FeatureKind::PcXorCacheLineOffset:
    return (fold_hash(ctx.pc, table_bits) ^ ctx.cacheline_offset()) & mask;
  case FeatureKind::PcXorByteOffset:
    return (fold_hash(ctx.pc, table_bits) ^ ctx.byte_offset()) & mask;
  case FeatureKind::PcPlusFirstAccess:
    return fold_hash((ctx.pc << 1) | std::uint64_t{ctx.first_access}, table_bits);
  case FeatureKind::CacheLineOffsetPlusFirstAccess:
    return ((ctx.cacheline_offset() << 1) | std::uint64_t{ctx.first_access}) & mask;
  case FeatureKind::Last4LoadPcs:
    return fold_hash(ctx.last4, table_bits);
  case FeatureKind::FlpPredPlusCacheLineOffset:
    return ((std::uint64_t{ctx.flp_pred} << 6) | ctx.cacheline_offset()) & mask;
  }
  return 0;
}

class WeightTable
{
public:
  explicit WeightTable(unsigned index_bits) : bits_(index_bits), weights_(std::size_t{1} << index_bits, 0)
  {
    if (index_bits == 0 || index_bits > 24)
      throw std::invalid_argument("weight table index bits must be within [1, 24]");
  }

  int at(std::uint64_t i) const { return weights_[i]; }
  void set(std::uint64_t i, int w) { weights_[i] = static_cast<std::int8_t>(std::clamp(w, kWeightMin, kWeightMax)); }
  void bump(std::uint64_t i, int delta) { set(i, weights_[i] + delta); }

  unsigned index_bits() const { return bits_; }
  std::size_t size() const { return weights_.size(); }
  std::uint64_t storage_bits() const { return size() * kWeightBits; }
  std::span<const std::int8_t> weights() const { return weights_; }

private:
  unsigned bits_;
  std::vector<std::int8_t> weights_;
};

enum class FlpDecision : std::uint8_t { HighOffChip, DelayedOffChip, OnChip };

inline std::string_view to_string(FlpDecision d)
{
  switch (d) {
  case FlpDecision::HighOffChip:
    return "high";
  case FlpDecision::DelayedOffChip:
    return "delayed";
  case FlpDecision::OnChip:
    return "onchip";
  }
  return "?";
}

constexpr FlpDecision classify_flp(int confidence, int tau_high, int tau_low)
{
  if (confidence > tau_high)
    return FlpDecision::HighOffChip;
  if (confidence >= tau_low)
    return FlpDecision::DelayedOffChip;
  return FlpDecision::OnChip;
}

// Update rule: move toward the outcome iff the prediction-time confidence
// disagreed in sign or was within the training margin.
constexpr bool should_train(int confidence, bool went_offchip, int theta_train)
{
  const int target = went_offchip ? 1 : -1;
  return confidence * target <= 0 || (confidence < 0 ? -confidence : confidence) <= theta_train;
}

class HashedPerceptron
{
public:
  struct Table {
    FeatureKind kind;
    WeightTable weights;
  };

  HashedPerceptron(std::span<const FeatureKind> features, std::span<const unsigned> index_bits)
  {
    if (features.size() != index_bits.size())
      throw std::invalid_argument("one table size per feature required");
    for (std::size_t i = 0; i < features.size(); ++i) {
      unsigned bits = has_fixed_width(features[i]) ? kFixedFeatureBits : index_bits[i];
      tables_.push_back({features[i], WeightTable(bits)});
    }
  }

  int predict_sum(const FeatureContext& ctx) const
  {
    int sum = 0;
    for (const auto& t : tables_)
      sum += t.weights.at(feature_index(t.kind, ctx, t.weights.index_bits()));
    return sum;
  }

  // Returns whether weights moved.
  bool train(const FeatureContext& ctx, bool went_offchip, int confidence_at_predict, int theta_train)
  {
    if (!should_train(confidence_at_predict, went_offchip, theta_train))
      return false;
    const int delta = went_offchip ? 1 : -1;
    for (auto& t : tables_)
      t.weights.bump(feature_index(t.kind, ctx, t.weights.index_bits()), delta);
    return true;
  }

  std::span<const Table> tables() const { return tables_; }
  std::span<Table> tables() { return tables_; }
  std::size_t feature_count() const { return tables_.size(); }
  int max_sum() const { return static_cast<int>(tables_.size()) * kWeightMax; }
  int min_sum() const { return static_cast<int>(tables_.size()) * kWeightMin; }

  std::uint64_t storage_bits() const
  {
    std::uint64_t bits = 0;
    for (const auto& t : tables_)
      bits += t.weights.storage_bits();
    return bits;
  }

private:
  std::vector<Table> tables_;
};

} // namespace tlpsim
