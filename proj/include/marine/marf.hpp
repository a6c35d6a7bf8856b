// Copyright 2026 The MARINE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// MARF video-feature files.
//
// Layout, all integers little-endian:
//
//   offset  size        field
//   0       4           magic "MARF" (4D 41 52 46)
//   4       4           u32 version (= 1)
//   8       4           u32 d, embedding width
//   12      4           u32 k, number of frames
//   16      4           u32 tag length L
//   20      L           backbone tag, UTF-8
//   20+L    4k          u32 frame indices
//   20+L+4k 4kd         f32 values, frame-major
//
// The video id is not stored; readers take it from the file stem.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "marine/error.hpp"

namespace marine {

struct VideoFeature {
  std::string video_id;
  std::vector<float> values;  // k * d, frame-major
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::vector<std::uint32_t> frame_indices;
  std::string backbone;

  std::span<const float> frame_block(std::size_t j) const {
    return std::span<const float>(values).subspan(j * d, d);
  }

  void validate() const {
    if (d == 0 || k == 0) throw InvalidInput("feature with k or d equal to 0");
    if (values.size() != static_cast<std::size_t>(k) * d)
      throw InvalidInput("feature vector length " +
                         std::to_string(values.size()) + " != k*d");
    if (frame_indices.size() != k)
      throw InvalidInput("frame index count " +
                         std::to_string(frame_indices.size()) + " != k");
    for (float v : values)
      if (!std::isfinite(v)) throw InvalidInput("non-finite feature value");
  }
};

/// Bitwise equality (so -0.0f and 0.0f differ), excluding video_id.
inline bool bit_equal(const VideoFeature& a, const VideoFeature& b) {
  return a.k == b.k && a.d == b.d && a.frame_indices == b.frame_indices &&
         a.backbone == b.backbone && a.values.size() == b.values.size() &&
         (a.values.empty() ||
          std::memcmp(a.values.data(), b.values.data(),
                      a.values.size() * sizeof(float)) == 0);
}

namespace marf {

inline constexpr std::uint8_t kMagic[4] = {0x4D, 0x41, 0x52, 0x46};
inline constexpr std::uint32_t kVersion = 1;
// Upper bound on the tag; anything longer is treated as corruption.
inline constexpr std::uint32_t kMaxTagBytes = 4096;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    need(n, field);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated ") + field + ", need " +
                            std::to_string(n) + " bytes, have " +
                            std::to_string(bytes_.size() - pos_),
                        pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode(const VideoFeature& f) {
  f.validate();
  if (f.backbone.size() > kMaxTagBytes) throw InvalidInput("backbone tag too long");
  std::vector<std::uint8_t> out;
  out.reserve(20 + f.backbone.size() + 4 * f.k + 4 * f.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  detail::put_u32(out, kVersion);
  detail::put_u32(out, f.d);
  detail::put_u32(out, f.k);
  detail::put_u32(out, static_cast<std::uint32_t>(f.backbone.size()));
  out.insert(out.end(), f.backbone.begin(), f.backbone.end());
  for (std::uint32_t idx : f.frame_indices) detail::put_u32(out, idx);
  for (float v : f.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline VideoFeature decode(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("bad magic, expected \"MARF\"", 0);
  VideoFeature f;
  const std::size_t version_at = r.pos();
  if (const auto v = r.u32("version"); v != kVersion)
    throw FormatError("unsupported version " + std::to_string(v), version_at);
  const std::size_t d_at = r.pos();
  f.d = r.u32("d");
  if (f.d == 0) throw FormatError("embedding width d is 0", d_at);
  const std::size_t k_at = r.pos();
  f.k = r.u32("k");
  if (f.k == 0) throw FormatError("frame count k is 0", k_at);
  const std::size_t tag_at = r.pos();
  const std::uint32_t tag_len = r.u32("tag length");
  if (tag_len > kMaxTagBytes)
    throw FormatError("tag length " + std::to_string(tag_len) + " too large",
                      tag_at);
  const auto tag = r.take(tag_len, "backbone tag");
  f.backbone.assign(tag.begin(), tag.end());

  const std::uint64_t n_values = static_cast<std::uint64_t>(f.k) * f.d;
  const std::uint64_t body = 4ULL * f.k + 4ULL * n_values;
  if (body != r.remaining()) {
    if (body > r.remaining())
      throw FormatError("truncated body, need " + std::to_string(body) +
                            " bytes, have " + std::to_string(r.remaining()),
                        r.pos());
    throw FormatError(std::to_string(r.remaining() - body) + " trailing bytes",
                      r.pos() + body);
  }
  f.frame_indices.reserve(f.k);
  for (std::uint32_t i = 0; i < f.k; ++i) f.frame_indices.push_back(r.u32("frame index"));
  f.values.reserve(n_values);
  for (std::uint64_t i = 0; i < n_values; ++i) {
    const std::size_t at = r.pos();
    const float v = std::bit_cast<float>(r.u32("value"));
    if (!std::isfinite(v)) throw FormatError("non-finite feature value", at);
    f.values.push_back(v);
  }
  return f;
}

}  // namespace marf

inline void write_feature(const std::filesystem::path& path,
                          const VideoFeature& feature) {
  const auto bytes = marf::encode(feature);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

inline VideoFeature read_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    VideoFeature f = marf::decode(bytes);
    f.video_id = path.stem().string();
    return f;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

}  // namespace marine
