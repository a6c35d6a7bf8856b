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

// Motion-based key-frame selection. Each frame t >= 1 is scored by the sum of
// absolute greyscale differences to frame t-1, and the k highest-scoring
// frames are kept in temporal order.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marine/error.hpp"
#include "marine/media.hpp"

namespace marine {

enum class SelectionMethod { motion_based, evenly_spaced };

inline std::string_view to_string(SelectionMethod m) {
  return m == SelectionMethod::motion_based ? "motion_based" : "evenly_spaced";
}

inline SelectionMethod parse_selection_method(std::string_view s) {
  if (s == "motion_based" || s == "motion") return SelectionMethod::motion_based;
  if (s == "evenly_spaced" || s == "even") return SelectionMethod::evenly_spaced;
  throw ConfigError("unknown frame selection method '" + std::string(s) + "'");
}

struct DissimilarityStream {
  // scores[t-1] compares frame t with frame t-1.
  std::vector<std::uint64_t> scores;
  std::size_t n_frames = 0;
};

struct FrameSelection {
  std::vector<std::size_t> indices;
  std::size_t k = 0;
  SelectionMethod method = SelectionMethod::motion_based;
  // Dissimilarity of each selected frame to its predecessor (motion only).
  std::optional<std::vector<std::uint64_t>> scores;

  friend bool operator==(const FrameSelection&, const FrameSelection&) = default;
};

struct ScanOptions {
  // Average-pool the greyscale frame by this factor before differencing.
  int downscale = 1;
};

inline std::uint64_t dissimilarity(const GreyFrame& a, const GreyFrame& b) {
  if (a.height != b.height || a.width != b.width)
    throw InvalidInput("dissimilarity of " + std::to_string(a.height) + "x" +
                       std::to_string(a.width) + " and " +
                       std::to_string(b.height) + "x" +
                       std::to_string(b.width) + " frames");
  std::uint64_t sum = 0;
  const std::size_t n = a.pixels.size();
  const std::uint8_t* pa = a.pixels.data();
  const std::uint8_t* pb = b.pixels.data();
  for (std::size_t i = 0; i < n; ++i)
    sum += static_cast<std::uint64_t>(pa[i] > pb[i] ? pa[i] - pb[i]
                                                     : pb[i] - pa[i]);
  return sum;
}

namespace detail {

inline GreyFrame pooled(const GreyFrame& g, int factor) {
  if (factor <= 1) return g;
  GreyFrame out{g.height / factor, g.width / factor, {}};
  if (out.height == 0 || out.width == 0)
    throw ConfigError("downscale factor larger than frame");
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width);
  const int area = factor * factor;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      int acc = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          acc += g.at(y * factor + dy, x * factor + dx);
      out.pixels[static_cast<std::size_t>(y) * out.width + x] =
          static_cast<std::uint8_t>((acc + area / 2) / area);
    }
  return out;
}

}  // namespace detail

inline DissimilarityStream score_stream(std::span<const Frame> frames,
                                        const ScanOptions& opts = {}) {
  if (frames.size() < 2)
    throw InvalidInput("too few frames to score motion (" +
                       std::to_string(frames.size()) + ")");
  DissimilarityStream out;
  out.n_frames = frames.size();
  out.scores.reserve(frames.size() - 1);
  GreyFrame prev = detail::pooled(to_greyscale(frames[0]), opts.downscale);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    GreyFrame cur = detail::pooled(to_greyscale(frames[t]), opts.downscale);
    out.scores.push_back(dissimilarity(prev, cur));
    prev = std::move(cur);
  }
  return out;
}

inline DissimilarityStream score_stream(const FrameSequence& seq,
                                        const ScanOptions& opts = {}) {
  return score_stream(std::span<const Frame>(seq.frames), opts);
}

namespace detail {

inline void pad_to(std::vector<std::size_t>& indices, std::size_t k) {
  const std::size_t last = indices.empty() ? 0 : indices.back();
  indices.resize(k, last);
}

}  // namespace detail

/// The k frames with the largest dissimilarity to their predecessor, ties to
/// the earlier frame, returned in ascending order and padded with the last
/// index when fewer than k candidates exist.
inline FrameSelection select_motion_based(const DissimilarityStream& stream,
                                          std::size_t k) {
  if (k == 0) throw InvalidInput("k must be at least 1");
  std::vector<std::size_t> order(stream.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{1});
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      const auto sa = stream.scores[a - 1];
                      const auto sb = stream.scores[b - 1];
                      return sa != sb ? sa > sb : a < b;
                    });
  order.resize(take);
  std::sort(order.begin(), order.end());

  FrameSelection sel{std::move(order), k, SelectionMethod::motion_based, {}};
  std::vector<std::uint64_t> scores;
  for (std::size_t t : sel.indices) scores.push_back(stream.scores[t - 1]);
  detail::pad_to(sel.indices, k);
  scores.resize(k, scores.empty() ? 0 : scores.back());
  sel.scores = std::move(scores);
  return sel;
}

/// round(i * (n - 1) / (k - 1)) for i in [0, k), starting from frame 0.
inline FrameSelection select_evenly_spaced(std::size_t n_frames, std::size_t k) {
  if (n_frames == 0 || k == 0)
    throw InvalidInput("evenly spaced selection needs n_frames >= 1 and k >= 1");
  std::vector<std::size_t> idx;
  idx.reserve(k);
  if (k == 1) {
    idx.push_back(0);
  } else {
    const std::size_t span = n_frames - 1;
    const std::size_t steps = k - 1;
    for (std::size_t i = 0; i < k; ++i) {
      // Half-up rounding in exact integer arithmetic.
      const std::size_t v = (2 * i * span + steps) / (2 * steps);
      if (idx.empty() || idx.back() != v) idx.push_back(v);
    }
  }
  detail::pad_to(idx, k);
  return {std::move(idx), k, SelectionMethod::evenly_spaced, std::nullopt};
}

/// Selection over an arbitrary run of frames. Motion scoring needs two frames;
/// a single-frame run falls back to selecting it k times.
inline FrameSelection select_frames(std::span<const Frame> frames,
                                    SelectionMethod method, std::size_t k,
                                    const ScanOptions& opts = {}) {
  if (frames.empty()) throw InvalidInput("cannot select frames from an empty clip");
  if (method == SelectionMethod::evenly_spaced)
    return select_evenly_spaced(frames.size(), k);
  if (frames.size() < 2) {
    FrameSelection sel{std::vector<std::size_t>(k, 0), k,
                       SelectionMethod::motion_based,
                       std::vector<std::uint64_t>(k, 0)};
    return sel;
  }
  return select_motion_based(score_stream(frames, opts), k);
}

}  // namespace marine
