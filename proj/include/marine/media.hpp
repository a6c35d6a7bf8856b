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

// In-memory frames and the deterministic image transforms used by frame
// scoring and embedding. Decoding from disk lives in media_io.hpp, which is
// the only part of the library that needs OpenCV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "marine/error.hpp"

namespace marine {

/// Interleaved 8-bit image, row-major, `channels` values per pixel (RGB order
/// for 3-channel frames).
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  std::uint8_t& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool empty() const { return pixels.empty(); }
  bool same_shape(const Frame& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct GreyFrame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  friend bool operator==(const GreyFrame&, const GreyFrame&) = default;
};

/// Exact positive frame rate num/den.
struct FrameRate {
  std::int64_t num = 1;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / den; }

  /// Nearest rational with denominator 1000 (or 1001 for NTSC-style rates).
  static FrameRate from_double(double fps) {
    if (!(fps > 0.0) || !std::isfinite(fps))
      throw InvalidInput("frame rate must be positive, got " +
                         std::to_string(fps));
    const double whole = std::round(fps);
    if (std::abs(fps - whole) < 1e-9) return {static_cast<std::int64_t>(whole), 1};
    const double ntsc = fps * 1.001;
    if (std::abs(ntsc - std::round(ntsc)) < 1e-6)
      return reduced(static_cast<std::int64_t>(std::round(ntsc)) * 1000, 1001);
    return reduced(static_cast<std::int64_t>(std::round(fps * 1000.0)), 1000);
  }

  static FrameRate reduced(std::int64_t n, std::int64_t d) {
    const std::int64_t g = std::gcd(n, d);
    return {n / g, d / g};
  }
  friend bool operator==(const FrameRate&, const FrameRate&) = default;
};

struct FrameSequence {
  std::string video_id;
  std::vector<Frame> frames;
  FrameRate fps;

  std::size_t n_frames() const { return frames.size(); }
  double duration() const {
    return static_cast<double>(frames.size()) / fps.value();
  }

  /// Throws InvalidInput when the frames disagree on shape or fps is not
  /// positive.
  void validate() const {
    if (fps.num <= 0 || fps.den <= 0)
      throw InvalidInput("non-positive frame rate for " + video_id);
    for (const Frame& f : frames)
      if (!f.same_shape(frames.front()))
        throw InvalidInput("frames of " + video_id +
                           " do not share dimensions");
  }
};

/// BT.601 luma, 0.299/0.587/0.114, rounded half-up. Single-channel frames
/// pass through unchanged.
inline GreyFrame to_greyscale(const Frame& frame) {
  GreyFrame out{frame.height, frame.width, {}};
  const std::size_t n = static_cast<std::size_t>(frame.height) * frame.width;
  if (frame.channels == 1) {
    out.pixels = frame.pixels;
    return out;
  }
  if (frame.channels != 3)
    throw InvalidInput("to_greyscale expects 1 or 3 channels, got " +
                       std::to_string(frame.channels));
  out.pixels.resize(n);
  const std::uint8_t* src = frame.pixels.data();
  for (std::size_t i = 0; i < n; ++i, src += 3) {
    const std::uint32_t acc = 299u * src[0] + 587u * src[1] + 114u * src[2];
    out.pixels[i] = static_cast<std::uint8_t>((acc + 500u) / 1000u);
  }
  return out;
}

/// Output size of resize_for_patch: shorter side becomes `short_side`, longer
/// side keeps the aspect ratio and is floored to a multiple of `patch_size`.
struct PatchGeometry {
  int height;
  int width;
};

inline PatchGeometry patch_geometry(int height, int width, int short_side,
                                    int patch_size) {
  if (patch_size <= 0 || short_side <= 0 || short_side % patch_size != 0)
    throw ConfigError("short side " + std::to_string(short_side) +
                      " is not a positive multiple of patch size " +
                      std::to_string(patch_size));
  if (height <= 0 || width <= 0) throw InvalidInput("empty frame");
  const bool portrait = height > width;
  const double shorter = portrait ? width : height;
  const double longer = portrait ? height : width;
  const double scaled = longer * short_side / shorter;
  // Guard against 461.99999 style artefacts before flooring.
  const auto scaled_int = static_cast<int>(std::floor(scaled + 1e-9));
  const int floored = (scaled_int / patch_size) * patch_size;
  return portrait ? PatchGeometry{floored, short_side}
                  : PatchGeometry{short_side, floored};
}

/// Bilinear resize with half-pixel centres and half-up rounding.
inline Frame resize_bilinear(const Frame& src, int out_h, int out_w) {
  if (src.empty()) throw InvalidInput("empty frame");
  if (out_h == src.height && out_w == src.width) return src;
  Frame dst(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;

  struct Tap {
    int i0, i1;
    double t;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> out(n_out);
    for (int o = 0; o < n_out; ++o) {
      double p = (o + 0.5) * scale - 0.5;
      p = std::clamp(p, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(p));
      const int i1 = std::min(i0 + 1, n_in - 1);
      out[o] = {i0, i1, p - i0};
    }
    return out;
  };
  const auto ty = taps(out_h, src.height, sy);
  const auto tx = taps(out_w, src.width, sx);

  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(ty[y].i0, tx[x].i0, c) * (1.0 - tx[x].t) +
                           src.at(ty[y].i0, tx[x].i1, c) * tx[x].t;
        const double bot = src.at(ty[y].i1, tx[x].i0, c) * (1.0 - tx[x].t) +
                           src.at(ty[y].i1, tx[x].i1, c) * tx[x].t;
        const double v = top * (1.0 - ty[y].t) + bot * ty[y].t;
        dst.at(y, x, c) =
            static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return dst;
}

inline Frame resize_for_patch(const Frame& frame, int short_side = 448,
                              int patch_size = 14) {
  const PatchGeometry g =
      patch_geometry(frame.height, frame.width, short_side, patch_size);
  return resize_bilinear(frame, g.height, g.width);
}

}  // namespace marine
