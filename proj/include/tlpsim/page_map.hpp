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

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace tlpsim
{

// First-touch virtual-to-physical mapping. Frames are handed out
// sequentially, or through a seeded bijection on kFrameBits-bit frame numbers
// when shuffling is enabled. `frame_base` offsets every frame so several
// address spaces can share one physical memory without aliasing.
class PageMap
{
public:
  static constexpr unsigned kFrameBits = 28;

  explicit PageMap(std::uint64_t page_size = 4096, std::uint64_t shuffle_seed = 0, std::uint64_t frame_base = 0)
      : page_bits_(static_cast<unsigned>(std::countr_zero(page_size))), seed_(shuffle_seed), frame_base_(frame_base)
  {
    if (page_size == 0 || !std::has_single_bit(page_size))
      throw std::invalid_argument("page size must be a power of two");
  }

  std::uint64_t translate(std::uint64_t vaddr)
  {
    const std::uint64_t vpage = vaddr >> page_bits_;
    auto [it, inserted] = map_.try_emplace(vpage, 0);
    if (inserted)
      it->second = frame_base_ + permute(next_frame_++);
    return (it->second << page_bits_) | (vaddr & ((std::uint64_t{1} << page_bits_) - 1));
  }

  std::uint64_t page_size() const { return std::uint64_t{1} << page_bits_; }
  std::size_t mapped_pages() const { return map_.size(); }

private:
  std::uint64_t permute(std::uint64_t frame) const
  {
    constexpr std::uint64_t mask = (std::uint64_t{1} << kFrameBits) - 1;
    if (seed_ == 0)
      return frame;
    // xor-shift and odd multiplies are bijections modulo 2^kFrameBits
    std::uint64_t x = (frame ^ seed_) & mask;
    x = (x * 0x9E3779B97F4A7C15ull) & mask;
    x ^= x >> 13;
    x = (x * ((seed_ << 1) | 1)) & mask;
    x ^= x >> 11;
    return x;
  }

  unsigned page_bits_;
  std::uint64_t seed_;
  std::uint64_t frame_base_;
  std::uint64_t next_frame_ = 0;
  std::unordered_map<std::uint64_t, std::uint64_t> map_;
};

} // namespace tlpsim
