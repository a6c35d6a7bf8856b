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

// Temporal action detection on untrimmed video: cut the video into
// non-overlapping windows, classify each window as a clip, and merge runs of
// adjacent positive windows into predicted intervals.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/classify.hpp"
#include "marine/embed.hpp"
#include "marine/evaluate.hpp"
#include "marine/frameselect.hpp"
#include "marine/media.hpp"

namespace marine {

struct ClipWindow {
  std::string clip_id;
  std::string source_video;
  double start = 0.0;  // seconds
  double end = 0.0;
  std::size_t frame_begin = 0;
  std::size_t frame_end = 0;  // exclusive

  TimeInterval interval() const { return {start, end}; }
};

/// ceil(duration / clip_length) windows; all but the last span exactly
/// clip_length seconds. Frame f belongs to window t when
/// f / fps lies in [t * L, (t + 1) * L).
inline std::vector<ClipWindow> segment(const std::string& source_video, std::size_t n_frames,
                                       FrameRate fps, double clip_length) {
  if (!(clip_length > 0.0)) throw ConfigError("clip length must be positive");
  if (fps.num <= 0 || fps.den <= 0) throw InvalidInput("non-positive frame rate");
  const double rate = fps.value();
  const double duration = static_cast<double>(n_frames) / rate;
  // Tolerate float noise: 10.0000000001 / 2 must not produce a sixth window.
  const auto count = static_cast<std::size_t>(std::ceil(duration / clip_length - 1e-9));
  std::vector<ClipWindow> out;
  out.reserve(count);
  auto boundary = [&](std::size_t t) {
    const double f = static_cast<double>(t) * clip_length * rate;
    return std::min<std::size_t>(n_frames, static_cast<std::size_t>(std::ceil(f - 1e-9)));
  };
  for (std::size_t t = 0; t < count; ++t) {
    ClipWindow w;
    w.clip_id = source_video + "__c" + std::to_string(t);
    w.source_video = source_video;
    w.start = static_cast<double>(t) * clip_length;
    w.end = t + 1 == count ? duration : static_cast<double>(t + 1) * clip_length;
    w.frame_begin = boundary(t);
    w.frame_end = t + 1 == count ? n_frames : boundary(t + 1);
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<ClipWindow> segment(const FrameSequence& seq, double clip_length) {
  return segment(seq.video_id, seq.n_frames(), seq.fps, clip_length);
}

struct DetectionResult {
  std::string source_video;
  std::vector<ClipWindow> windows;
  std::vector<double> window_scores;
  std::vector<int> window_positive;
  std::vector<TimeInterval> predicted;
  std::vector<TimeInterval> truth;
};

/// Maximal runs of adjacent positive windows become one interval each.
inline std::vector<TimeInterval> merge_positive_windows(std::span<const ClipWindow> windows,
                                                        std::span<const int> positive) {
  if (windows.size() != positive.size())
    throw InvalidInput("window and flag counts differ");
  std::vector<TimeInterval> out;
  for (std::size_t i = 0; i < windows.size();) {
    if (!positive[i]) {
      ++i;
      continue;
    }
    const double start = windows[i].start;
    while (i + 1 < windows.size() && positive[i + 1]) ++i;
    out.push_back({start, windows[i].end});
    ++i;
  }
  return out;
}

/// Builds the feature vector of one window: select frames, embed, flatten.
using WindowFeaturizer = std::function<VideoFeature(const ClipWindow&, std::span<const Frame>)>;

inline WindowFeaturizer make_featurizer(const Embedder& embedder, SelectionMethod method,
                                        std::size_t k, ScanOptions scan = {}) {
  return [&embedder, method, k, scan](const ClipWindow& w, std::span<const Frame> frames) {
    const FrameSelection sel = select_frames(frames, method, k, scan);
    return build_video_feature(embedder, w.clip_id, frames, sel);
  };
}

inline std::vector<double> as_f64(std::span<const float> v) { return {v.begin(), v.end()}; }

/// Classifies every window of `seq` with `head` (first output, eval mode) and
/// merges positives.
inline DetectionResult localize(const FrameSequence& seq, std::span<const ClipWindow> windows,
                                const ClassifierHead& head, const WindowFeaturizer& featurize,
                                std::vector<TimeInterval> truth = {}) {
  DetectionResult r;
  r.source_video = seq.video_id;
  r.windows.assign(windows.begin(), windows.end());
  r.truth = std::move(truth);
  for (const ClipWindow& w : windows) {
    if (w.frame_end > seq.n_frames() || w.frame_begin >= w.frame_end)
      throw InvalidInput(w.clip_id + ": window frames outside the video");
    const auto frames = std::span<const Frame>(seq.frames).subspan(
        w.frame_begin, w.frame_end - w.frame_begin);
    double score = 0.0;
    try {
      const VideoFeature f = featurize(w, frames);
      score = forward(head, as_f64(f.values))[0];
    } catch (const Error& e) {
      throw DataError(w.clip_id + ": " + e.what());
    }
    r.window_scores.push_back(score);
    r.window_positive.push_back(score >= head.threshold);
  }
  r.predicted = merge_positive_windows(r.windows, r.window_positive);
  return r;
}

/// Same as localize but from precomputed per-window scores.
inline DetectionResult localize_scores(const std::string& source_video,
                                       std::vector<ClipWindow> windows,
                                       std::vector<double> scores, double threshold,
                                       std::vector<TimeInterval> truth = {}) {
  if (windows.size() != scores.size()) throw InvalidInput("window and score counts differ");
  DetectionResult r{source_video, std::move(windows), std::move(scores), {}, {}, std::move(truth)};
  for (double s : r.window_scores) r.window_positive.push_back(s >= threshold);
  r.predicted = merge_positive_windows(r.windows, r.window_positive);
  return r;
}

inline DetectionAp detection_ap(std::span<const DetectionResult> results, double threshold,
                                std::span<const std::size_t> subset = {}) {
  std::vector<std::vector<TimeInterval>> pred, truth;
  if (subset.empty()) {
    for (const auto& r : results) {
      pred.push_back(r.predicted);
      truth.push_back(r.truth);
    }
  } else {
    for (std::size_t i : subset) {
      pred.push_back(results[i].predicted);
      truth.push_back(results[i].truth);
    }
  }
  return detection_ap(pred, truth, threshold);
}

/// Bootstrap over videos: each resample draws as many videos as there are
/// results, with replacement, and scores them with detection AP.
inline BootstrapReport evaluate_detection(std::span<const DetectionResult> results,
                                          double threshold, std::uint64_t seed,
                                          std::size_t resamples = 100) {
  if (results.empty()) throw InvalidInput("evaluate_detection needs at least one video");
  return bootstrap(
      [&](std::span<const std::size_t> idx) { return detection_ap(results, threshold, idx).ap; },
      results.size(), resamples, seed);
}

inline nlohmann::json to_json(const TimeInterval& t) { return nlohmann::json::array({t.start, t.end}); }

inline nlohmann::json to_json(const DetectionResult& r, double threshold) {
  const VideoPrecision vp = match_intervals(r.predicted, r.truth, threshold);
  nlohmann::json pred = nlohmann::json::array();
  for (const auto& m : vp.matches)
    pred.push_back({{"interval", to_json(m.predicted)},
                    {"t_iou", m.best_t_iou},
                    {"correct", m.correct}});
  nlohmann::json truth = nlohmann::json::array();
  for (const auto& t : r.truth) truth.push_back(to_json(t));
  nlohmann::json windows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.windows.size(); ++i)
    windows.push_back({{"clip_id", r.windows[i].clip_id},
                       {"start", r.windows[i].start},
                       {"end", r.windows[i].end},
                       {"score", i < r.window_scores.size() ? r.window_scores[i] : 0.0},
                       {"positive", i < r.window_positive.size() && r.window_positive[i]}});
  return {{"source_video", r.source_video},
          {"t_iou_threshold", threshold},
          {"windows", windows},
          {"predicted", pred},
          {"truth", truth},
          {"precision", vp.precision}};
}

}  // namespace marine
