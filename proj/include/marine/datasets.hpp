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

// Dataset construction: reef-style clip slicing with middle-clip labels,
// fish-predation filtering of a normalised Animal Kingdom annotation table,
// group-aware train/test splits and representative subsampling.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "marine/detect.hpp"
#include "marine/evaluate.hpp"
#include "marine/manifest.hpp"
#include "marine/random.hpp"

namespace marine {

inline constexpr std::string_view kAttackLabel = "attack";

/// The eight predation-related actions, lower-cased.
inline constexpr std::array<std::string_view, 8> kPredationActions = {
    "attacking", "being eaten", "biting",      "chasing",
    "fighting",  "fleeing",     "retaliating", "struggling"};

/// Lower-case, trim, and collapse internal whitespace runs to one space.
inline std::string normalize_label(std::string_view s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || ch == '_') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

inline bool is_predation_action(std::string_view action) {
  const std::string n = normalize_label(action);
  return std::find(kPredationActions.begin(), kPredationActions.end(), n) !=
         kPredationActions.end();
}

// ---------------------------------------------------------------------------
// Reef-style slicing

struct SourceVideo {
  std::string video_id;
  std::size_t n_frames = 0;
  FrameRate fps;
  std::string media;  // path the frames are decoded from
};

inline constexpr std::size_t kClipsPerReefVideo = 5;

/// Cuts each video into five clips of `clip_length` seconds; the centre clip
/// is the positive one.
inline DatasetManifest slice_coral_reef(const std::vector<SourceVideo>& videos,
                                        double clip_length = 2.0,
                                        std::string_view positive_label = kAttackLabel) {
  DatasetManifest m;
  m.task = Task::binary;
  m.label_space = {std::string(positive_label)};
  for (const auto& v : videos) {
    const double expected = kClipsPerReefVideo * clip_length * v.fps.value();
    if (std::abs(static_cast<double>(v.n_frames) - expected) > 1.0 + 1e-9)
      throw DataError("cannot slice " + v.video_id + ": " + std::to_string(v.n_frames) +
                      " frames, expected " + std::to_string(expected) + " (+-1) for " +
                      std::to_string(kClipsPerReefVideo) + " clips of " +
                      std::to_string(clip_length) + " s");
    // Force exactly five windows even when the capture is one frame short.
    const double duration = static_cast<double>(v.n_frames) / v.fps.value();
    auto windows = segment(v.video_id, v.n_frames, v.fps, duration / kClipsPerReefVideo);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      ManifestRecord r;
      r.video_id = windows[i].clip_id;
      if (i == kClipsPerReefVideo / 2) r.labels = {std::string(positive_label)};
      r.source_video = v.video_id;
      r.clip = ClipInfo{v.media, windows[i].frame_begin, windows[i].frame_end,
                        windows[i].start, windows[i].end};
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Annotation tables

/// One actor annotation: a video may have several rows (one per species
/// group acting in it).
struct AkAnnotation {
  std::string video_id;
  Split split = Split::train;
  std::string species_group;
  std::vector<std::string> actions;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// Reads `video_id,split,species_group,actions` with semicolon-separated
/// actions; a header row is required.
inline std::vector<AkAnnotation> read_ak_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty annotation table");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[normalize_label(header[i])] = i;
  for (const char* need : {"video id", "split", "species group", "actions"})
    if (!col.count(need))
      throw DataError(path.string() + ": missing column '" + std::string(need) + "'");

  std::vector<AkAnnotation> rows;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
    AkAnnotation a;
    a.video_id = f[col["video id"]];
    a.split = parse_split(normalize_label(f[col["split"]]));
    a.species_group = f[col["species group"]];
    std::string_view acts = f[col["actions"]];
    while (!acts.empty()) {
      const auto semi = acts.find(';');
      const std::string act = normalize_label(acts.substr(0, semi));
      if (!act.empty()) a.actions.push_back(act);
      if (semi == std::string_view::npos) break;
      acts.remove_prefix(semi + 1);
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

struct FilterResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

/// Keeps videos in which a fish acts; a kept video is positive iff a fish
/// performs one of the predation actions. Action strings outside
/// `known_actions` (when given) are reported and treated as non-predation.
inline FilterResult filter_ak_fish(const std::vector<AkAnnotation>& rows,
                                   const std::set<std::string>& known_actions = {},
                                   const std::set<std::string>& fish_groups = {"fish"}) {
  struct Agg {
    Split split;
    bool fish = false;
    bool positive = false;
  };
  std::map<std::string, Agg> videos;
  std::vector<std::string> order;
  FilterResult out;
  std::set<std::string> warned;
  for (const auto& a : rows) {
    auto [it, fresh] = videos.try_emplace(a.video_id, Agg{a.split});
    if (fresh) order.push_back(a.video_id);
    if (it->second.split != a.split)
      throw DataError("video " + a.video_id + " listed in both splits");
    const bool fish = fish_groups.count(normalize_label(a.species_group)) > 0;
    it->second.fish |= fish;
    for (const auto& act : a.actions) {
      const bool predation = is_predation_action(act);
      if (!predation && !known_actions.empty() && !known_actions.count(act) &&
          warned.insert(act).second)
        out.warnings.push_back("unknown action '" + act + "' (first seen in " + a.video_id + ")");
      if (fish && predation) it->second.positive = true;
    }
  }
  out.manifest.task = Task::binary;
  out.manifest.label_space = {std::string(kAttackLabel)};
  for (const auto& id : order) {
    const Agg& g = videos[id];
    if (!g.fish) continue;
    ManifestRecord r;
    r.video_id = id;
    r.split = g.split;
    if (g.positive) r.labels = {std::string(kAttackLabel)};
    out.manifest.records.push_back(std::move(r));
  }
  return out;
}

/// Multi-label manifest: every action performed in a video is one label.
inline DatasetManifest ak_multilabel_manifest(const std::vector<AkAnnotation>& rows) {
  std::map<std::string, std::size_t> pos;
  DatasetManifest m;
  m.task = Task::multilabel;
  for (const auto& a : rows) {
    auto [it, fresh] = pos.try_emplace(a.video_id, m.records.size());
    if (fresh) {
      ManifestRecord r;
      r.video_id = a.video_id;
      r.split = a.split;
      m.records.push_back(std::move(r));
    }
    auto& labels = m.records[it->second].labels;
    for (const auto& act : a.actions)
      if (std::find(labels.begin(), labels.end(), act) == labels.end()) labels.push_back(act);
  }
  for (auto& r : m.records) std::sort(r.labels.begin(), r.labels.end());
  m.label_space = DatasetManifest::collect_labels(m.records);
  return m;
}

// ---------------------------------------------------------------------------
// Splits and sampling

/// round(test_fraction * groups) whole groups go to the test split, at least
/// one and never all of them.
inline DatasetManifest split_grouped(DatasetManifest m, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test fraction must be in (0, 1)");
  std::vector<std::string> groups;
  std::set<std::string> seen;
  for (const auto& r : m.records)
    if (seen.insert(r.group()).second) groups.push_back(r.group());
  if (groups.size() < 2)
    throw DataError("grouped split needs at least 2 groups, have " + std::to_string(groups.size()));
  std::sort(groups.begin(), groups.end());
  Rng rng(derive_seed(seed, {0x5e17}));
  rng.shuffle(std::span(groups));
  auto n_test = static_cast<std::size_t>(std::floor(test_fraction * groups.size() + 0.5));
  n_test = std::clamp<std::size_t>(n_test, 1, groups.size() - 1);
  const std::set<std::string> test(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_test));
  for (auto& r : m.records) r.split = test.count(r.group()) ? Split::test : Split::train;
  return m;
}

/// Occurrences of each label_space entry over `records`.
inline std::vector<std::size_t> label_counts(const std::vector<ManifestRecord>& records,
                                             const std::vector<std::string>& space) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < space.size(); ++i) index[space[i]] = i;
  std::vector<std::size_t> counts(space.size(), 0);
  for (const auto& r : records)
    for (const auto& l : r.labels)
      if (auto it = index.find(l); it != index.end()) ++counts[it->second];
  return counts;
}

struct SampleResult {
  DatasetManifest manifest;
  ChiSquareResult chi2;
  std::size_t classes_kept = 0;
  std::size_t attempts = 0;
};

inline constexpr double kRepresentativeMinP = 0.05;
inline constexpr std::size_t kRepresentativeMaxAttempts = 20;

/// Random n-record subset with the population's test share (rounded), redrawn
/// until the label distribution passes the chi-square check at min_p.
inline SampleResult representative_sample(const DatasetManifest& m, std::size_t n,
                                          std::uint64_t seed, double min_p = kRepresentativeMinP,
                                          std::size_t max_attempts = kRepresentativeMaxAttempts) {
  if (n == 0 || n > m.records.size())
    throw ConfigError("sample size " + std::to_string(n) + " outside [1, " +
                      std::to_string(m.records.size()) + "]");
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < m.records.size(); ++i)
    (m.records[i].split == Split::train ? train : test).push_back(i);
  const double test_share = static_cast<double>(test.size()) / static_cast<double>(m.records.size());
  const auto n_test = std::min(test.size(),
                               static_cast<std::size_t>(std::floor(test_share * n + 0.5)));
  const std::size_t n_train = n - n_test;
  if (n_train > train.size()) throw DataError("not enough training records to sample");

  const auto space = m.label_space.empty() ? DatasetManifest::collect_labels(m.records)
                                           : m.label_space;
  const auto population = label_counts(m.records, space);

  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, {0x5a3e, attempt}));
    auto draw = [&](std::vector<std::size_t> pool, std::size_t k) {
      for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      pool.resize(k);
      return pool;
    };
    auto picked = draw(train, n_train);
    const auto picked_test = draw(test, n_test);
    picked.insert(picked.end(), picked_test.begin(), picked_test.end());
    std::sort(picked.begin(), picked.end());

    SampleResult res;
    res.attempts = attempt + 1;
    for (std::size_t i : picked) res.manifest.records.push_back(m.records[i]);
    res.manifest.task = m.task;
    const auto counts = label_counts(res.manifest.records, space);
    res.chi2 = chi2_homogeneity(counts, population);
    for (std::size_t c = 0; c < space.size(); ++c)
      if (counts[c] > 0) res.manifest.label_space.push_back(space[c]);
    res.classes_kept = res.manifest.label_space.size();
    if (res.chi2.p_value >= min_p) return res;
  }
  throw DataError("no representative sample with p >= " + std::to_string(min_p) + " in " +
                  std::to_string(max_attempts) + " attempts");
}

}  // namespace marine
