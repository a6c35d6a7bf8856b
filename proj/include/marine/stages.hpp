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

// File-level building blocks for the individual CLI stages: manifests with
// feature paths, clip decoding, prediction files.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/pipeline.hpp"

namespace marine {

inline fs::path resolve_path(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

/// Manifest read from disk with its label space and task inferred from the
/// labels present (more than one label means multi-label).
inline DatasetManifest load_manifest(const fs::path& path, std::optional<Task> task = std::nullopt) {
  DatasetManifest m;
  m.records = read_manifest(path);
  m.label_space = DatasetManifest::collect_labels(m.records);
  if (m.label_space.empty()) m.label_space = {std::string(kAttackLabel)};
  m.task = task ? *task : (m.label_space.size() > 1 ? Task::multilabel : Task::binary);
  if (m.task == Task::binary && m.label_space.size() != 1)
    throw DataError("binary task needs exactly one label, manifest has " +
                    std::to_string(m.label_space.size()));
  m.validate();
  return m;
}

/// Features and targets of `records`, loaded from their feature_path (relative
/// paths resolve against `base`). Groups are source videos.
inline CvData cv_data_from_records(const DatasetManifest& m, const std::vector<const ManifestRecord*>& records,
                                   const fs::path& base) {
  if (records.empty()) throw DataError("no records in the requested split");
  CvData d;
  d.task = m.task;
  std::size_t dim = 0;
  std::string backbone;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ManifestRecord& r = *records[i];
    if (r.feature_path.empty()) throw DataError(r.video_id + ": no feature_path (run extract first)");
    VideoFeature f;
    try {
      f = read_feature(resolve_path(base, r.feature_path));
    } catch (const Error& e) {
      throw DataError(r.video_id + ": " + e.what());
    }
    if (i == 0) {
      dim = f.values.size();
      backbone = f.backbone;
      d.x = Matrix(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
      d.y = Matrix::Zero(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(m.label_space.size()));
    } else if (f.values.size() != dim || f.backbone != backbone) {
      throw DataError(r.video_id + ": feature shape or backbone differs from the first record");
    }
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < dim; ++c) d.x(row, static_cast<Eigen::Index>(c)) = f.values[c];
    for (std::size_t c = 0; c < m.label_space.size(); ++c)
      d.y(row, static_cast<Eigen::Index>(c)) = r.has_label(m.label_space[c]) ? 1.0 : 0.0;
    d.groups.push_back(r.group());
  }
  return d;
}

/// Decodes clip media once per file and hands out clip frame ranges.
class ClipSource {
 public:
  explicit ClipSource(fs::path base, DecodeConfig cfg = {}) : base_(std::move(base)), cfg_(cfg) {}

  std::span<const Frame> frames(const ManifestRecord& r) {
    if (!r.clip) throw DataError(r.video_id + ": record has no clip info");
    const std::string key = r.clip->media;
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      if (cache_.size() >= 4) cache_.clear();
      it = cache_.emplace(key, decode_video(resolve_path(base_, key), cfg_)).first;
    }
    const auto& seq = it->second;
    if (r.clip->frame_end > seq.n_frames() || r.clip->frame_begin >= r.clip->frame_end)
      throw DataError(r.video_id + ": clip frames outside " + key);
    return std::span<const Frame>(seq.frames).subspan(r.clip->frame_begin,
                                                      r.clip->frame_end - r.clip->frame_begin);
  }

 private:
  fs::path base_;
  DecodeConfig cfg_;
  std::map<std::string, FrameSequence> cache_;
};

/// One prediction line: scores and decisions per label for one clip.
struct PredictionRecord {
  std::string video_id;
  std::string source_video;
  std::optional<TimeInterval> interval;
  std::vector<double> scores;
  std::vector<int> predicted;
  std::vector<int> labels;
};

struct PredictionFile {
  std::vector<std::string> label_space;
  double threshold = 0.5;
  std::string config_hash;
  std::vector<PredictionRecord> records;
};

inline void write_predictions(const fs::path& path, const PredictionFile& p) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json{{"label_space", p.label_space}, {"threshold", p.threshold}, {"config_hash", p.config_hash}}
             .dump()
      << "\n";
  for (const auto& r : p.records) {
    nlohmann::json j = {{"video_id", r.video_id}, {"source_video", r.source_video}, {"scores", r.scores},
                        {"predicted", r.predicted}, {"labels", r.labels}, {"interval", nullptr}};
    if (r.interval) j["interval"] = {r.interval->start, r.interval->end};
    out << j.dump() << "\n";
  }
}

/// The first line is a header with the label space and threshold.
inline PredictionFile read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path.string());
  PredictionFile p;
  std::string line;
  bool header = true;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (header) {
        p.label_space = j.at("label_space").get<std::vector<std::string>>();
        p.threshold = j.at("threshold").get<double>();
        p.config_hash = j.value("config_hash", std::string());
        header = false;
        continue;
      }
      PredictionRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.source_video = j.value("source_video", r.video_id);
      r.scores = j.at("scores").get<std::vector<double>>();
      r.predicted = j.at("predicted").get<std::vector<int>>();
      r.labels = j.at("labels").get<std::vector<int>>();
      if (j.contains("interval") && !j.at("interval").is_null())
        r.interval = TimeInterval{j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
      if (r.scores.size() != p.label_space.size() || r.predicted.size() != r.scores.size() ||
          r.labels.size() != r.scores.size())
        throw DataError("score, prediction and label counts must match the label space");
      p.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (header) throw DataError(path.string() + ": empty predictions file");
  return p;
}

/// Scores `records` with `head`. Binary decisions use the head threshold; for
/// multi-label heads the same threshold applies to every class.
inline PredictionFile predict_records(const ClassifierHead& head, const DatasetManifest& m,
                                      const std::vector<const ManifestRecord*>& records, const fs::path& base) {
  const CvData d = cv_data_from_records(m, records, base);
  if (d.x.cols() != head.layers.front().weights.cols())
    throw DataError("feature dimension " + std::to_string(d.x.cols()) + " does not match the head input " +
                    std::to_string(head.layers.front().weights.cols()));
  if (static_cast<std::size_t>(head.layers.back().weights.rows()) != m.label_space.size())
    throw DataError("head outputs do not match the manifest label space");
  const Matrix s = predict(head, d.x);
  PredictionFile p;
  p.label_space = m.label_space;
  p.threshold = head.threshold;
  for (std::size_t i = 0; i < records.size(); ++i) {
    PredictionRecord r;
    r.video_id = records[i]->video_id;
    r.source_video = records[i]->group();
    if (records[i]->clip) r.interval = TimeInterval{records[i]->clip->start, records[i]->clip->end};
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const auto row = static_cast<Eigen::Index>(i);
      r.scores.push_back(s(row, c));
      r.predicted.push_back(s(row, c) >= head.threshold);
      r.labels.push_back(d.y(row, c) > 0.5);
    }
    p.records.push_back(std::move(r));
  }
  return p;
}

/// Binary AR report, or bootstrap mAP for multi-label predictions.
inline nlohmann::json evaluate_predictions(const PredictionFile& p, std::size_t resamples, std::uint64_t seed) {
  if (p.records.empty()) throw DataError("no predictions");
  if (p.label_space.size() == 1) {
    ArPredictions ar;
    for (const auto& r : p.records) {
      ar.ids.push_back(r.video_id);
      ar.scores.push_back(r.scores[0]);
      ar.labels.push_back(r.labels[0]);
      ar.predicted.push_back(r.predicted[0]);
    }
    return evaluate_ar(ar, resamples, seed);
  }
  const auto n = static_cast<Eigen::Index>(p.records.size());
  const auto c = static_cast<Eigen::Index>(p.label_space.size());
  Matrix S(n, c), L(n, c);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      S(i, j) = p.records[static_cast<std::size_t>(i)].scores[static_cast<std::size_t>(j)];
      L(i, j) = p.records[static_cast<std::size_t>(i)].labels[static_cast<std::size_t>(j)];
    }
  const auto full = multilabel_map(S, L);
  auto sub = [&](std::span<const std::size_t> idx) {
    Matrix s(static_cast<Eigen::Index>(idx.size()), c), l(static_cast<Eigen::Index>(idx.size()), c);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) = S.row(static_cast<Eigen::Index>(idx[i]));
      l.row(static_cast<Eigen::Index>(i)) = L.row(static_cast<Eigen::Index>(idx[i]));
    }
    return multilabel_map(s, l).map;
  };
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t j = 0; j < p.label_space.size(); ++j)
    per_class[p.label_space[j]] = std::isnan(full.per_class_ap[j]) ? nlohmann::json() : nlohmann::json(full.per_class_ap[j]);
  return {{"test", {{"n", p.records.size()}, {"map", full.map}, {"per_class_ap", per_class}}},
          {"bootstrap", {{"map", to_json(bootstrap(sub, p.records.size(), resamples, seed))}}}};
}

/// Groups clip predictions by source video, orders windows by start time and
/// merges positives. Videos missing from `truth` get no ground truth.
inline std::vector<DetectionResult> detections_from_predictions(
    const PredictionFile& p, const std::map<std::string, std::vector<TimeInterval>>& truth) {
  if (p.label_space.size() != 1) throw DataError("detection needs binary predictions");
  std::map<std::string, std::vector<const PredictionRecord*>> by_source;
  for (const auto& r : p.records) {
    if (!r.interval) throw DataError(r.video_id + ": prediction has no time interval");
    by_source[r.source_video].push_back(&r);
  }
  std::vector<DetectionResult> out;
  for (auto& [src, recs] : by_source) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const auto* a, const auto* b) { return a->interval->start < b->interval->start; });
    std::vector<ClipWindow> windows;
    std::vector<double> scores;
    for (const auto* r : recs) {
      windows.push_back({r->video_id, src, r->interval->start, r->interval->end, 0, 0});
      scores.push_back(r->scores[0]);
    }
    auto it = truth.find(src);
    out.push_back(localize_scores(src, std::move(windows), std::move(scores), p.threshold,
                                  it == truth.end() ? std::vector<TimeInterval>{} : it->second));
  }
  return out;
}

}  // namespace marine
