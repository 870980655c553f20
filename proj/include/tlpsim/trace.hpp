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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlpsim
{

enum class AccessKind : std::uint8_t { Load = 0, Store = 1 };

// One memory operation. `gap` counts the non-memory instructions retired
// since the previous record.
struct TraceRecord {
  std::uint16_t gap = 0;
  AccessKind kind = AccessKind::Load;
  std::uint64_t pc = 0;
  std::uint64_t vaddr = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

class TraceFormatError : public std::runtime_error
{
public:
  TraceFormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), reason_(what), offset_(offset)
  {
  }
  std::size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string reason_;
  std::size_t offset_;
};

class TraceIoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kRecordBytes = 19;
inline constexpr std::size_t kHeaderBytes = 8;
inline constexpr std::array<char, 4> kTraceMagic{'T', 'L', 'P', 'T'};
inline constexpr std::uint16_t kTraceVersion = 1;

namespace detail
{
template <typename T>
void put_le(std::byte* out, T value)
{
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out[i] = static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
}

template <typename T>
T get_le(const std::byte* in)
{
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[i])) << (8 * i);
  return static_cast<T>(v);
}
} // namespace detail

// Layout: gap(2) kind(1) pc(8) vaddr(8), little-endian.
inline std::array<std::byte, kRecordBytes> encode_record(const TraceRecord& rec)
{
  std::array<std::byte, kRecordBytes> out{};
  detail::put_le<std::uint16_t>(out.data(), rec.gap);
  out[2] = static_cast<std::byte>(rec.kind);
  detail::put_le<std::uint64_t>(out.data() + 3, rec.pc);
  detail::put_le<std::uint64_t>(out.data() + 11, rec.vaddr);
  return out;
}

// `base_offset` only feeds error messages.
inline TraceRecord decode_record(std::span<const std::byte> bytes, std::size_t base_offset = 0)
{
  if (bytes.size() < kRecordBytes)
    throw TraceFormatError("truncated trace record (" + std::to_string(bytes.size()) + " of " + std::to_string(kRecordBytes) + " bytes)",
                           base_offset + bytes.size());
  TraceRecord rec;
  rec.gap = detail::get_le<std::uint16_t>(bytes.data());
  auto kind = std::to_integer<std::uint8_t>(bytes[2]);
  if (kind > 1)
    throw TraceFormatError("unknown access kind byte " + std::to_string(kind), base_offset + 2);
  rec.kind = static_cast<AccessKind>(kind);
  rec.pc = detail::get_le<std::uint64_t>(bytes.data() + 3);
  rec.vaddr = detail::get_le<std::uint64_t>(bytes.data() + 11);
  return rec;
}

inline std::array<std::byte, kHeaderBytes> encode_header()
{
  std::array<std::byte, kHeaderBytes> out{};
  for (std::size_t i = 0; i < kTraceMagic.size(); ++i)
    out[i] = static_cast<std::byte>(kTraceMagic[i]);
  detail::put_le<std::uint16_t>(out.data() + 4, kTraceVersion);
  return out;
}

inline std::vector<std::byte> encode_trace(std::span<const TraceRecord> records)
{
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + records.size() * kRecordBytes);
  auto header = encode_header();
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& rec : records) {
    auto bytes = encode_record(rec);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

inline std::vector<TraceRecord> decode_trace(std::span<const std::byte> bytes)
{
  if (bytes.size() < kHeaderBytes)
    throw TraceFormatError("truncated trace header", bytes.size());
  for (std::size_t i = 0; i < kTraceMagic.size(); ++i)
    if (std::to_integer<char>(bytes[i]) != kTraceMagic[i])
      throw TraceFormatError("bad trace magic", i);
  auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kTraceVersion)
    throw TraceFormatError("unsupported trace version " + std::to_string(version), 4);

  std::vector<TraceRecord> records;
  records.reserve((bytes.size() - kHeaderBytes) / kRecordBytes);
  for (std::size_t off = kHeaderBytes; off < bytes.size(); off += kRecordBytes) {
    auto rec = decode_record(bytes.subspan(off, std::min(kRecordBytes, bytes.size() - off)), off);
    if (rec.pc == 0)
      throw TraceFormatError("record " + std::to_string(records.size()) + " has pc 0", off + 3);
    records.push_back(rec);
  }
  return records;
}

inline std::uint64_t instruction_count(std::span<const TraceRecord> records)
{
  std::uint64_t total = 0;
  for (const auto& rec : records)
    total += rec.gap + 1u;
  return total;
}

inline void write_trace_file(const std::filesystem::path& path, std::span<const TraceRecord> records)
{
  auto bytes = encode_trace(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw TraceIoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw TraceIoError("write failed: " + path.string());
}

inline std::vector<TraceRecord> read_trace_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw TraceIoError("cannot open trace " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto bytes = std::as_bytes(std::span{raw});
  try {
    return decode_trace(bytes);
  } catch (const TraceFormatError& e) {
    throw TraceFormatError(path.string() + ": " + e.reason(), e.offset());
  }
}

} // namespace tlpsim
