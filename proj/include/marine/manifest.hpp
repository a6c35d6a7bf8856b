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

// Dataset manifests: JSON Lines, one record per video or clip.
//
//   {"video_id": "...", "feature_path": "...", "labels": ["..."],
//    "split": "train" | "test", "source_video": "..." | null}
//
// Clip records produced by slicing also carry an optional "clip" object
// ({"media", "frame_begin", "frame_end", "start", "end"}) that locates the
// clip inside its source media.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/error.hpp"

namespace marine {

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

enum class Task { binary, multilabel };

struct ClipInfo {
  std::string media;
  std::size_t frame_begin = 0;
  std::size_t frame_end = 0;  // exclusive
  double start = 0.0;         // seconds
  double end = 0.0;

  friend bool operator==(const ClipInfo&, const ClipInfo&) = default;
};

struct ManifestRecord {
  std::string video_id;
  std::string feature_path;
  std::vector<std::string> labels;
  Split split = Split::train;
  std::optional<std::string> source_video;
  std::optional<ClipInfo> clip;

  /// Grouping key for leakage-free splits: the source video, else itself.
  const std::string& group() const {
    return source_video ? *source_video : video_id;
  }
  bool has_label(const std::string& l) const {
    return std::find(labels.begin(), labels.end(), l) != labels.end();
  }
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j = {{"video_id", r.video_id},
                      {"feature_path", r.feature_path},
                      {"labels", r.labels},
                      {"split", to_string(r.split)},
                      {"source_video", nullptr}};
  if (r.source_video) j["source_video"] = *r.source_video;
  if (r.clip)
    j["clip"] = {{"media", r.clip->media},
                 {"frame_begin", r.clip->frame_begin},
                 {"frame_end", r.clip->frame_end},
                 {"start", r.clip->start},
                 {"end", r.clip->end}};
  return j;
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.feature_path = j.value("feature_path", std::string());
  r.labels = j.value("labels", std::vector<std::string>{});
  r.split = parse_split(j.value("split", std::string("train")));
  if (j.contains("source_video") && !j["source_video"].is_null())
    r.source_video = j["source_video"].get<std::string>();
  if (j.contains("clip") && !j["clip"].is_null()) {
    const auto& c = j["clip"];
    r.clip = ClipInfo{c.value("media", std::string()),
                      c.at("frame_begin").get<std::size_t>(),
                      c.at("frame_end").get<std::size_t>(),
                      c.value("start", 0.0), c.value("end", 0.0)};
  }
  return r;
}

/// Records in file order plus the task they describe.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> label_space;
  Task task = Task::binary;

  /// Sorted union of all labels.
  static std::vector<std::string> collect_labels(
      const std::vector<ManifestRecord>& records) {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.labels.begin(), r.labels.end());
    return {s.begin(), s.end()};
  }

  void validate() const {
    std::set<std::string> ids;
    const std::set<std::string> space(label_space.begin(), label_space.end());
    for (const auto& r : records) {
      if (!ids.insert(r.video_id).second)
        throw DataError("duplicate video_id '" + r.video_id + "' in manifest");
      for (const auto& l : r.labels)
        if (!space.count(l))
          throw DataError("label '" + l + "' of " + r.video_id +
                          " outside the label space");
    }
  }

  std::vector<const ManifestRecord*> in_split(Split s) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
      if (r.split == s) out.push_back(&r);
    return out;
  }
};

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<ManifestRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

}  // namespace marine
