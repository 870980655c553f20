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

namespace tlpsim
{

// Training payload carried by a Load Queue entry (48 bits) or an L1D MSHR
// entry (49 bits, adds the prediction bit).
struct RequestMetadata {
  static constexpr unsigned kHashedPcBits = 32;
  static constexpr unsigned kLast4Bits = 10;
  static constexpr unsigned kConfidenceBits = 5;
  static constexpr int kConfidenceMin = -(1 << (kConfidenceBits - 1));
  static constexpr int kConfidenceMax = (1 << (kConfidenceBits - 1)) - 1;
  static constexpr unsigned kLoadQueueBits = kHashedPcBits + kLast4Bits + 1 + kConfidenceBits;
  static constexpr unsigned kMshrBits = kLoadQueueBits + 1;

  std::uint32_t hashed_pc = 0;
  std::uint16_t last4_pcs = 0;
  bool first_access = false;
  std::int8_t confidence = 0;
  bool prediction = false;

  static std::int8_t clamp_confidence(int sum) { return static_cast<std::int8_t>(std::clamp(sum, kConfidenceMin, kConfidenceMax)); }

  // Bit layout, LSB first: hashed_pc | last4 | first | confidence | prediction.
  std::uint64_t pack() const
  {
    std::uint64_t bits = hashed_pc;
    bits |= std::uint64_t{last4_pcs & ((1u << kLast4Bits) - 1)} << kHashedPcBits;
    bits |= std::uint64_t{first_access} << (kHashedPcBits + kLast4Bits);
    bits |= std::uint64_t(static_cast<std::uint8_t>(confidence) & ((1u << kConfidenceBits) - 1)) << (kHashedPcBits + kLast4Bits + 1);
    bits |= std::uint64_t{prediction} << kLoadQueueBits;
    return bits;
  }

  static RequestMetadata unpack(std::uint64_t bits)
  {
    RequestMetadata m;
    m.hashed_pc = static_cast<std::uint32_t>(bits);
    m.last4_pcs = static_cast<std::uint16_t>((bits >> kHashedPcBits) & ((1u << kLast4Bits) - 1));
    m.first_access = (bits >> (kHashedPcBits + kLast4Bits)) & 1;
    int raw = static_cast<int>((bits >> (kHashedPcBits + kLast4Bits + 1)) & ((1u << kConfidenceBits) - 1));
    m.confidence = static_cast<std::int8_t>(raw > kConfidenceMax ? raw - (1 << kConfidenceBits) : raw);
    m.prediction = (bits >> kLoadQueueBits) & 1;
    return m;
  }

  friend bool operator==(const RequestMetadata&, const RequestMetadata&) = default;
};

} // namespace tlpsim
