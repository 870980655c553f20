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

#include <string>
#include <string_view>
#include <vector>

#include "tlpsim/synthetic.hpp"

namespace tlpsim
{

// Named synthetic workloads used by the examples and the acceptance suite.
inline std::vector<std::string> workload_presets() { return {"stream", "strided", "chase", "mixed", "chase_mix", "chase_hot", "scan_random"}; }

inline SyntheticSpec workload_preset(std::string_view name, std::uint64_t records, std::uint64_t seed = 1)
{
  SyntheticSpec s;
  s.record_count = records;
  s.seed = seed;
  if (name == "stream") {
    s.pattern = StreamPattern{};
    s.mean_gap = 4;
  } else if (name == "strided") {
    s.pattern = StridedPattern{256, 0};
    s.mean_gap = 4;
  } else if (name == "chase") {
    s.pattern = PointerChasePattern{64ull << 20, 0.8};
    s.mean_gap = 4;
  } else if (name == "mixed") {
    MixedPattern m;
    s.pattern = m;
    s.mean_gap = 4;
    s.store_ratio = 0.1;
  } else if (name == "chase_mix") {
    // strided walk plus a latency-bound chase with scattered hot lines
    MixedPattern m;
    m.stream_weight = 0.0;
    m.strided_weight = 0.3;
    m.chase_weight = 0.7;
    m.chase.exponent = 1.4;
    m.chase.clustered = false;
    s.pattern = m;
    s.mean_gap = 12;
  } else if (name == "chase_hot") {
    s.pattern = PointerChasePattern{64ull << 20, 1.6};
    s.mean_gap = 16;
  } else if (name == "scan_random") {
    MixedPattern m;
    m.stream_weight = 0.5;
    m.strided_weight = 0.0;
    m.chase_weight = 0.5;
    m.chase = PointerChasePattern{256ull << 20, 0.0};
    s.pattern = m;
    s.mean_gap = 4;
  } else {
    throw SpecError("unknown workload preset '" + std::string(name) + "'");
  }
  return s;
}

} // namespace tlpsim
