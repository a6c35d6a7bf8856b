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

// Synthetic untrimmed videos for end-to-end checks: a blob drifts slowly over
// a noisy background and dashes across the frame during a short "attack"
// inside the centre clip. Frames are rendered with motion blur (the blob is
// integrated over the exposure), so the dash changes both inter-frame
// differences and per-frame image statistics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/evaluate.hpp"
#include "marine/media.hpp"
#include "marine/random.hpp"

namespace marine {

struct SyntheticSpec {
  std::size_t n_videos = 60;
  int height = 64;
  int width = 64;
  std::size_t clip_frames = 24;
  std::size_t clips_per_video = 5;
  std::int64_t fps = 12;
  // Fraction of the centre clip's frames covered by the event; the event
  // window is placed at a random offset inside that clip.
  double event_fraction = 1.0;
  double slow_speed = 0.5;  // px / frame
  double fast_speed = 9.0;  // px / frame
  double blob_radius = 6.0;
  double contrast = 150.0;        // blob minus background intensity
  double appearance_jitter = 0.0;  // relative spread of brightness, contrast and radius per video
  double noise_sigma = 4.0;
  std::uint64_t seed = 7;

  std::size_t frames_per_video() const { return clip_frames * clips_per_video; }
  double clip_seconds() const { return static_cast<double>(clip_frames) / static_cast<double>(fps); }
  std::size_t event_clip() const { return clips_per_video / 2; }
  std::size_t event_frames() const {
    return std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(event_fraction * static_cast<double>(clip_frames))), 1,
        clip_frames);
  }

  void validate() const {
    if (n_videos == 0 || height < 8 || width < 8 || clip_frames < 2 || clips_per_video == 0 ||
        fps <= 0)
      throw ConfigError("synthetic spec has empty or too small dimensions");
    if (!(event_fraction > 0.0 && event_fraction <= 1.0))
      throw ConfigError("event_fraction must be in (0, 1]");
    if (slow_speed < 0.0 || fast_speed < 0.0 || blob_radius <= 0.0 || noise_sigma < 0.0 ||
        contrast < 0.0 || !(appearance_jitter >= 0.0 && appearance_jitter < 1.0))
      throw ConfigError("synthetic speeds, radius and noise must be non-negative");
    if (2.0 * blob_radius + 2.0 >= std::min(height, width))
      throw ConfigError("blob does not fit in the frame");
  }
};

struct SyntheticVideo {
  FrameSequence seq;
  std::size_t event_begin = 0;  // frame range of the fast motion
  std::size_t event_end = 0;
  std::vector<TimeInterval> truth;  // the centre clip
};

namespace detail {

struct BlobPath {
  double x, y, vx, vy;
};

inline void reflect(double& p, double& v, double lo, double hi) {
  for (int guard = 0; guard < 8 && (p < lo || p > hi); ++guard) {
    if (p < lo) {
      p = 2 * lo - p;
      v = -v;
    }
    if (p > hi) {
      p = 2 * hi - p;
      v = -v;
    }
  }
  p = std::clamp(p, lo, hi);
}

}  // namespace detail

inline SyntheticVideo generate_video(const SyntheticSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, {0x5f17, index}));
  SyntheticVideo out;
  char id[32];
  std::snprintf(id, sizeof id, "synth_%04zu", index);
  out.seq.video_id = id;
  out.seq.fps = {spec.fps, 1};

  const std::size_t n = spec.frames_per_video();
  const std::size_t clip0 = spec.event_clip() * spec.clip_frames;
  const std::size_t len = spec.event_frames();
  out.event_begin = clip0 + rng.below(spec.clip_frames - len + 1);
  out.event_end = out.event_begin + len;
  const double cs = spec.clip_seconds();
  out.truth = {{spec.event_clip() * cs, (spec.event_clip() + 1) * cs}};

  const double bg = 60.0 * rng.uniform(1.0 - spec.appearance_jitter, 1.0 + spec.appearance_jitter);
  const double fg = bg + spec.contrast * rng.uniform(1.0 - spec.appearance_jitter, 1.0 + spec.appearance_jitter);
  const double bg_rgb[3] = {bg * 0.7, bg * 0.95, bg * 1.2};
  const double fg_rgb[3] = {fg, fg * 0.85, fg * 0.55};
  const double r = spec.blob_radius * rng.uniform(1.0 - spec.appearance_jitter, 1.0 + spec.appearance_jitter);
  const double lo_x = r + 1, hi_x = spec.width - r - 2;
  const double lo_y = r + 1, hi_y = spec.height - r - 2;

  detail::BlobPath b{rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), 0, 0};
  double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> cover(static_cast<std::size_t>(spec.height) * spec.width);
  for (std::size_t t = 0; t < n; ++t) {
    const bool fast = t >= out.event_begin && t < out.event_end;
    heading += rng.normal() * (fast ? 0.05 : 0.3);
    const double speed = fast ? spec.fast_speed : spec.slow_speed;
    b.vx = speed * std::cos(heading);
    b.vy = speed * std::sin(heading);

    // Exposure: the blob sweeps from its previous position to the new one.
    const double x0 = b.x, y0 = b.y;
    double x1 = x0 + b.vx, y1 = y0 + b.vy;
    detail::reflect(x1, b.vx, lo_x, hi_x);
    detail::reflect(y1, b.vy, lo_y, hi_y);
    heading = std::atan2(b.vy, b.vx);
    b.x = x1;
    b.y = y1;

    const double dist = std::hypot(x1 - x0, y1 - y0);
    const int samples = std::clamp(static_cast<int>(std::ceil(dist * 2.0)), 1, 48);
    std::fill(cover.begin(), cover.end(), 0.0);
    const int ylo = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - r - 1)));
    const int yhi = std::min(spec.height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + r + 1)));
    const int xlo = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - r - 1)));
    const int xhi = std::min(spec.width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + r + 1)));
    for (int s = 0; s < samples; ++s) {
      const double a = samples == 1 ? 1.0 : static_cast<double>(s) / (samples - 1);
      const double cx = x0 + a * (x1 - x0), cy = y0 + a * (y1 - y0);
      for (int y = ylo; y <= yhi; ++y)
        for (int x = xlo; x <= xhi; ++x) {
          const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
          // One-pixel anti-aliased edge.
          const double c = std::clamp(r + 0.5 - d, 0.0, 1.0);
          cover[static_cast<std::size_t>(y) * spec.width + x] += c / samples;
        }
    }

    Frame f(spec.height, spec.width, 3);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const double c = cover[static_cast<std::size_t>(y) * spec.width + x];
        for (int ch = 0; ch < 3; ++ch) {
          const double v = bg_rgb[ch] * (1.0 - c) + fg_rgb[ch] * c + spec.noise_sigma * rng.normal();
          f.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
      }
    out.seq.frames.push_back(std::move(f));
  }
  return out;
}

inline std::vector<SyntheticVideo> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<SyntheticVideo> out;
  out.reserve(spec.n_videos);
  for (std::size_t i = 0; i < spec.n_videos; ++i) out.push_back(generate_video(spec, i));
  return out;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"n_videos", s.n_videos},         {"height", s.height},
          {"width", s.width},               {"clip_frames", s.clip_frames},
          {"clips_per_video", s.clips_per_video}, {"fps", s.fps},
          {"event_fraction", s.event_fraction},   {"slow_speed", s.slow_speed},
          {"fast_speed", s.fast_speed},     {"blob_radius", s.blob_radius},
          {"contrast", s.contrast},         {"appearance_jitter", s.appearance_jitter},
          {"noise_sigma", s.noise_sigma},   {"seed", s.seed}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_videos = j.value("n_videos", s.n_videos);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.clip_frames = j.value("clip_frames", s.clip_frames);
  s.clips_per_video = j.value("clips_per_video", s.clips_per_video);
  s.fps = j.value("fps", s.fps);
  s.event_fraction = j.value("event_fraction", s.event_fraction);
  s.slow_speed = j.value("slow_speed", s.slow_speed);
  s.fast_speed = j.value("fast_speed", s.fast_speed);
  s.blob_radius = j.value("blob_radius", s.blob_radius);
  s.contrast = j.value("contrast", s.contrast);
  s.appearance_jitter = j.value("appearance_jitter", s.appearance_jitter);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace marine
