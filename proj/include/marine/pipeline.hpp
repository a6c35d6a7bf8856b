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

// End-to-end run: slice -> split -> select frames -> embed (cached) ->
// cross-validate -> final training -> AR and AD evaluation.
//
// Every artifact written under output_dir carries the hash of the run
// config. Feature caches are keyed by (dataset, selector, k, backbone) and
// refuse to mix configurations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/classify.hpp"
#include "marine/datasets.hpp"
#include "marine/detect.hpp"
#include "marine/embed.hpp"
#include "marine/evaluate.hpp"
#include "marine/frameselect.hpp"
#include "marine/head_io.hpp"
#include "marine/manifest.hpp"
#include "marine/marf.hpp"
#include "marine/media_io.hpp"
#include "marine/modelselect.hpp"
#include "marine/onnx_embedder.hpp"
#include "marine/parallel.hpp"
#include "marine/synth.hpp"

namespace marine {

namespace fs = std::filesystem;

struct EmbedderConfig {
  std::string backend = "mock";  // mock | feature_store | onnx_model
  std::string model_path;        // onnx file, or feature-store directory
};

inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c) {
  if (c.backend == "mock") return std::make_unique<MockEmbedder>();
  if (c.backend == "feature_store") return std::make_unique<FeatureStoreEmbedder>(fs::path(c.model_path));
  if (c.backend == "onnx_model" || c.backend == "onnx")
    return std::make_unique<OnnxEmbedder>(fs::path(c.model_path));
  throw ConfigError("unknown embedder backend '" + c.backend + "'");
}

struct RunConfig {
  std::string dataset = "synthetic";  // synthetic | videos
  SyntheticSpec synthetic;
  std::string videos_dir;    // one video file or frame directory per source
  std::string ground_truth;  // optional JSON Lines truth for `videos`
  double video_fps = 0.0;    // fps override for frame directories without meta.json
  std::size_t k = 10;
  double clip_length = 2.0;
  SelectionMethod selector = SelectionMethod::motion_based;
  int scan_downscale = 1;
  EmbedderConfig embedder;
  CvPlan cv = CvPlan::for_task(Task::binary);
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;
  std::uint64_t bootstrap_seed = 2;
  std::size_t bootstrap_resamples = 100;
  std::vector<double> tiou_thresholds{0.5, 0.25};
  std::string output_dir = "marine_run";
  std::size_t workers = default_workers();

  void validate() const {
    if (k == 0) throw ConfigError("k must be at least 1");
    if (!(clip_length > 0.0)) throw ConfigError("clip_length must be positive");
    if (scan_downscale < 1) throw ConfigError("scan_downscale must be >= 1");
    for (double t : tiou_thresholds)
      if (!(t > 0.0 && t <= 1.0)) throw ConfigError("t-IoU thresholds must be in (0, 1]");
    if (bootstrap_resamples == 0) throw ConfigError("bootstrap_resamples must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
    cv.validate();
    if (dataset == "synthetic") {
      synthetic.validate();
    } else if (dataset == "videos") {
      if (!fs::is_directory(videos_dir))
        throw ConfigError("videos_dir does not exist: " + videos_dir);
      if (!ground_truth.empty() && !fs::exists(ground_truth))
        throw ConfigError("ground truth file does not exist: " + ground_truth);
    } else {
      throw ConfigError("unknown dataset kind '" + dataset + "'");
    }
    if (embedder.backend != "mock") {
      if (embedder.model_path.empty() || !fs::exists(embedder.model_path))
        throw ConfigError("model file not found: '" + embedder.model_path + "'");
    }
    if (embedder.backend != "mock" && embedder.backend != "feature_store" &&
        embedder.backend != "onnx_model" && embedder.backend != "onnx")
      throw ConfigError("unknown embedder backend '" + embedder.backend + "'");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"synthetic", to_json(c.synthetic)},
          {"videos_dir", c.videos_dir},
          {"ground_truth", c.ground_truth},
          {"video_fps", c.video_fps},
          {"k", c.k},
          {"clip_length", c.clip_length},
          {"selector", std::string(to_string(c.selector))},
          {"scan_downscale", c.scan_downscale},
          {"embedder", {{"backend", c.embedder.backend}, {"model_path", c.embedder.model_path}}},
          {"cv",
           {{"folds", c.cv.folds},
            {"hidden_layers", c.cv.hidden_layers},
            {"dropout_rates", c.cv.dropout_rates},
            {"learning_rates", c.cv.learning_rates},
            {"cv_epochs", c.cv.cv_epochs},
            {"final_epochs", c.cv.final_epochs},
            {"batch_size", c.cv.batch_size},
            {"seed", c.cv.seed},
            {"max_fold_attempts", c.cv.max_fold_attempts}}},
          {"test_fraction", c.test_fraction},
          {"split_seed", c.split_seed},
          {"bootstrap_seed", c.bootstrap_seed},
          {"bootstrap_resamples", c.bootstrap_resamples},
          {"tiou_thresholds", c.tiou_thresholds},
          {"output_dir", c.output_dir}};
}

/// Fields absent from `j` keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("synthetic")) c.synthetic = synthetic_spec_from_json(j["synthetic"]);
    c.videos_dir = j.value("videos_dir", c.videos_dir);
    c.ground_truth = j.value("ground_truth", c.ground_truth);
    c.video_fps = j.value("video_fps", c.video_fps);
    c.k = j.value("k", c.k);
    c.clip_length = j.value("clip_length", c.clip_length);
    if (j.contains("selector")) c.selector = parse_selection_method(j["selector"].get<std::string>());
    c.scan_downscale = j.value("scan_downscale", c.scan_downscale);
    if (j.contains("embedder")) {
      c.embedder.backend = j["embedder"].value("backend", c.embedder.backend);
      c.embedder.model_path = j["embedder"].value("model_path", c.embedder.model_path);
    }
    if (j.contains("cv")) {
      const auto& v = j["cv"];
      c.cv.folds = v.value("folds", c.cv.folds);
      c.cv.hidden_layers = v.value("hidden_layers", c.cv.hidden_layers);
      c.cv.dropout_rates = v.value("dropout_rates", c.cv.dropout_rates);
      c.cv.learning_rates = v.value("learning_rates", c.cv.learning_rates);
      c.cv.cv_epochs = v.value("cv_epochs", c.cv.cv_epochs);
      c.cv.final_epochs = v.value("final_epochs", c.cv.final_epochs);
      c.cv.batch_size = v.value("batch_size", c.cv.batch_size);
      c.cv.seed = v.value("seed", c.cv.seed);
      c.cv.max_fold_attempts = v.value("max_fold_attempts", c.cv.max_fold_attempts);
    }
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.bootstrap_seed = j.value("bootstrap_seed", c.bootstrap_seed);
    c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
    c.tiou_thresholds = j.value("tiou_thresholds", c.tiou_thresholds);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string hash_json(const nlohmann::json& j) {
  const std::string s = j.dump();
  Fnv1a h;
  h.update(s.data(), s.size());
  return hex64(h.value());
}

/// Hash of everything that affects results (output location excluded).
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return hash_json(j);
}

// ---------------------------------------------------------------------------
// Source loading

struct LoadedSource {
  FrameSequence seq;
  std::vector<TimeInterval> truth;
};

/// Ground truth JSON Lines: {"source_video": "...", "intervals": [[s, e], ...]}.
inline std::map<std::string, std::vector<TimeInterval>> read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth " + path.string());
  std::map<std::string, std::vector<TimeInterval>> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& v = out[j.at("source_video").get<std::string>()];
      for (const auto& iv : j.at("intervals")) {
        TimeInterval t{iv.at(0).get<double>(), iv.at(1).get<double>()};
        if (!t.valid()) throw DataError("invalid interval");
        v.push_back(t);
      }
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_ground_truth(const fs::path& path,
                               const std::vector<std::pair<std::string, std::vector<TimeInterval>>>& truth) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [id, ivs] : truth) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : ivs) a.push_back(to_json(t));
    out << nlohmann::json{{"source_video", id}, {"intervals", a}}.dump() << "\n";
  }
}

/// Video files and frame directories directly under `dir`, sorted by name.
inline std::vector<fs::path> list_media(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) {
      out.push_back(e.path());
    } else if (e.is_regular_file()) {
      const auto ext = e.path().extension().string();
      if (ext == ".mp4" || ext == ".avi" || ext == ".mov" || ext == ".mkv" || ext == ".webm")
        out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<LoadedSource> load_sources(const RunConfig& c) {
  std::vector<LoadedSource> out;
  if (c.dataset == "synthetic") {
    for (auto& v : generate_synthetic(c.synthetic)) out.push_back({std::move(v.seq), std::move(v.truth)});
    return out;
  }
  std::map<std::string, std::vector<TimeInterval>> truth;
  if (!c.ground_truth.empty()) truth = read_ground_truth(c.ground_truth);
  DecodeConfig dc;
  if (c.video_fps > 0.0) dc.fps = c.video_fps;
  for (const auto& p : list_media(c.videos_dir)) {
    LoadedSource s{decode_video(p, dc), {}};
    if (auto it = truth.find(s.seq.video_id); it != truth.end()) {
      s.truth = it->second;
    } else {
      // Centre clip of five, as in the slicing labels.
      s.truth = {{2 * c.clip_length, 3 * c.clip_length}};
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no videos found in " + c.videos_dir);
  return out;
}

// ---------------------------------------------------------------------------
// Feature extraction with caching

struct FeatureCache {
  fs::path dir;
  std::string key;

  /// Creates or opens the cache directory; throws if it was built under a
  /// different key.
  static FeatureCache open(const fs::path& root, const std::string& backbone,
                           SelectionMethod selector, std::size_t k, const nlohmann::json& key_parts) {
    FeatureCache c;
    c.dir = root / backbone / (std::string(to_string(selector)) + "_k" + std::to_string(k));
    c.key = hash_json(key_parts);
    fs::create_directories(c.dir);
    const fs::path stamp = c.dir / "cache.json";
    if (fs::exists(stamp)) {
      std::ifstream in(stamp);
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded() || j.value("key", std::string()) != c.key)
        throw ConfigError("feature cache " + c.dir.string() +
                          " was built with a different configuration; delete it or change output_dir");
    } else {
      std::ofstream out(stamp);
      out << nlohmann::json{{"key", c.key}, {"parts", key_parts}}.dump(2) << "\n";
    }
    return c;
  }

  fs::path path_for(const std::string& clip_id) const { return dir / (clip_id + ".marf"); }
};

/// One feature per window, computed in parallel and cached on disk.
inline std::vector<VideoFeature> extract_window_features(
    const std::vector<LoadedSource>& sources, const std::vector<std::vector<ClipWindow>>& windows,
    const Embedder& embedder, SelectionMethod selector, std::size_t k, ScanOptions scan,
    const FeatureCache& cache, std::size_t workers) {
  struct Job {
    std::size_t source, window;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < windows.size(); ++s)
    for (std::size_t w = 0; w < windows[s].size(); ++w) jobs.push_back({s, w});
  std::vector<VideoFeature> out(jobs.size());
  const auto featurize = make_featurizer(embedder, selector, k, scan);
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const ClipWindow& w = windows[jobs[i].source][jobs[i].window];
    const fs::path p = cache.path_for(w.clip_id);
    if (fs::exists(p)) {
      VideoFeature f = read_feature(p);
      if (f.k != k || f.d != embedder.dim() || f.backbone != embedder.identity())
        throw ConfigError("cached feature " + p.string() + " does not match the configuration");
      f.video_id = w.clip_id;
      out[i] = std::move(f);
      return;
    }
    const auto& frames = sources[jobs[i].source].seq.frames;
    try {
      out[i] = featurize(w, std::span<const Frame>(frames).subspan(w.frame_begin, w.frame_end - w.frame_begin));
    } catch (const NumericError& e) {
      throw NumericError("extract " + w.clip_id + ": " + e.what());
    } catch (const Error& e) {
      throw DataError("extract " + w.clip_id + ": " + e.what());
    }
    write_feature(p, out[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation helpers shared by the pipeline and the CLI

struct ArPredictions {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> predicted;
};

inline nlohmann::json to_json(const BootstrapReport& r) {
  return {{"mean", r.mean},
          {"std", r.std},
          {"half_width_95", r.half_width_95},
          {"resamples", r.values.size()},
          {"resample_size", r.resample_size},
          {"redraws", r.redraws},
          {"seed", r.seed},
          {"values", r.values}};
}

/// Full-test metrics plus bootstrap distributions of accuracy, precision,
/// recall, F1 and ROC AUC.
inline nlohmann::json evaluate_ar(const ArPredictions& p, std::size_t resamples, std::uint64_t seed) {
  const auto full = confusion_metrics(BinaryConfusion::from(p.predicted, p.labels));
  nlohmann::json test = {{"n", p.labels.size()},
                         {"accuracy", full.accuracy},
                         {"precision", full.precision},
                         {"recall", full.recall},
                         {"f1", full.f1},
                         {"roc_auc", nullptr}};
  try {
    test["roc_auc"] = roc_auc(p.scores, p.labels).auc;
  } catch (const MetricError&) {
  }
  auto gather = [&](std::span<const std::size_t> idx) {
    std::vector<int> pr, lb;
    std::vector<double> sc;
    for (std::size_t i : idx) {
      pr.push_back(p.predicted[i]);
      lb.push_back(p.labels[i]);
      sc.push_back(p.scores[i]);
    }
    return std::tuple{pr, lb, sc};
  };
  auto metric = [&](auto pick) -> IndexMetric {
    return [&, pick](std::span<const std::size_t> idx) {
      auto [pr, lb, sc] = gather(idx);
      return pick(confusion_metrics(BinaryConfusion::from(pr, lb)));
    };
  };
  nlohmann::json boot;
  const std::size_t n = p.labels.size();
  boot["accuracy"] = to_json(bootstrap(metric([](const ConfusionMetrics& m) { return m.accuracy; }), n, resamples, seed));
  boot["precision"] = to_json(bootstrap(metric([](const ConfusionMetrics& m) { return m.precision; }), n, resamples, seed));
  boot["recall"] = to_json(bootstrap(metric([](const ConfusionMetrics& m) { return m.recall; }), n, resamples, seed));
  boot["f1"] = to_json(bootstrap(metric([](const ConfusionMetrics& m) { return m.f1; }), n, resamples, seed));
  if (!test["roc_auc"].is_null())
    boot["roc_auc"] = to_json(bootstrap(
        [&](std::span<const std::size_t> idx) {
          auto [pr, lb, sc] = gather(idx);
          return roc_auc(sc, lb).auc;
        },
        n, resamples, seed));
  return {{"test", test}, {"bootstrap", boot}};
}

/// Plain-text table: one row per model, mean +- 1.96 std in percent.
inline std::string summary_table(const std::vector<std::pair<std::string, nlohmann::json>>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %-16s %-16s %-16s %-16s\n", "Model", "Accuracy", "Precision",
                "Recall", "F1-score");
  os << buf;
  for (const auto& [name, ar] : rows) {
    auto cell = [&](const char* key) {
      const auto& b = ar.at("bootstrap").at(key);
      char c[32];
      std::snprintf(c, sizeof c, "%.2f +- %.2f", 100.0 * b.at("mean").get<double>(),
                    100.0 * b.at("half_width_95").get<double>());
      return std::string(c);
    };
    std::snprintf(buf, sizeof buf, "%-28s %-16s %-16s %-16s %-16s\n", name.c_str(), cell("accuracy").c_str(),
                  cell("precision").c_str(), cell("recall").c_str(), cell("f1").c_str());
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// The run

struct RunResult {
  nlohmann::json report;
  ClassifierHead head;
  CvReport cv;
  std::vector<DetectionResult> detections;
  double test_f1 = 0.0;
};

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline RunResult run_pipeline(RunConfig config) {
  if (config.dataset == "synthetic") config.clip_length = config.synthetic.clip_seconds();
  config.validate();
  const std::string hash = config_hash(config);
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);

  std::unique_ptr<Embedder> embedder;
  try {
    embedder = make_embedder(config.embedder);
  } catch (const Error& e) {
    throw ConfigError(std::string("stage embedder: ") + e.what());
  }

  // Slice and split.
  const auto sources = load_sources(config);
  std::vector<SourceVideo> infos;
  for (const auto& s : sources) infos.push_back({s.seq.video_id, s.seq.n_frames(), s.seq.fps, ""});
  DatasetManifest manifest = slice_coral_reef(infos, config.clip_length);
  manifest = split_grouped(std::move(manifest), config.test_fraction, config.split_seed);

  std::vector<std::vector<ClipWindow>> windows;
  for (const auto& s : sources) {
    const double duration = s.seq.duration();
    windows.push_back(segment(s.seq.video_id, s.seq.n_frames(), s.seq.fps, duration / kClipsPerReefVideo));
  }

  // Features.
  nlohmann::json key_parts = {{"dataset", config.dataset},
                              {"synthetic", config.dataset == "synthetic" ? to_json(config.synthetic) : nlohmann::json()},
                              {"videos_dir", config.videos_dir},
                              {"video_fps", config.video_fps},
                              {"clip_length", config.clip_length},
                              {"selector", std::string(to_string(config.selector))},
                              {"k", config.k},
                              {"scan_downscale", config.scan_downscale},
                              {"backbone", embedder->identity()}};
  const FeatureCache cache =
      FeatureCache::open(out_dir / "features", embedder->identity(), config.selector, config.k, key_parts);
  const auto features = extract_window_features(sources, windows, *embedder, config.selector, config.k,
                                                 {config.scan_downscale}, cache, config.workers);
  std::map<std::string, const VideoFeature*> by_id;
  for (const auto& f : features) by_id[f.video_id] = &f;
  for (auto& r : manifest.records) r.feature_path = fs::relative(cache.path_for(r.video_id), out_dir).string();
  write_manifest(out_dir / "manifest.jsonl", manifest.records);

  // Model selection on the training split.
  auto assemble = [&](Split split, std::vector<std::string>* ids) {
    const auto recs = manifest.in_split(split);
    const std::size_t dim = features.front().values.size();
    CvData d{Matrix(recs.size(), dim), Matrix(recs.size(), 1), {}, Task::binary};
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const VideoFeature& f = *by_id.at(recs[i]->video_id);
      for (std::size_t c = 0; c < dim; ++c) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = f.values[c];
      d.y(static_cast<Eigen::Index>(i), 0) = recs[i]->has_label(std::string(kAttackLabel)) ? 1.0 : 0.0;
      d.groups.push_back(recs[i]->group());
      if (ids) ids->push_back(recs[i]->video_id);
    }
    return d;
  };
  const CvData train_data = assemble(Split::train, nullptr);
  std::vector<std::string> test_ids;
  const CvData test_data = assemble(Split::test, &test_ids);

  RunResult result;
  CvPlan plan = config.cv;
  plan.workers = config.workers;
  try {
    result.cv = cross_validate(plan, train_data);
    result.head = finalize(plan, train_data, result.cv.chosen);
  } catch (const NumericError& e) {
    throw NumericError(std::string("stage cv: ") + e.what());
  } catch (const Error& e) {
    throw DataError(std::string("stage cv: ") + e.what());
  }
  result.cv.chosen_threshold = result.head.threshold;
  auto cv_json = to_json(result.cv);
  cv_json["config_hash"] = hash;
  write_json(out_dir / "cv_report.json", cv_json);
  auto head_json = to_json(result.head);
  head_json["config_hash"] = hash;
  write_json(out_dir / "head.json", head_json);

  // Action recognition on the test split.
  const Matrix test_scores = predict(result.head, test_data.x);
  ArPredictions ar;
  ar.ids = test_ids;
  std::map<std::string, double> score_of;
  for (Eigen::Index i = 0; i < test_scores.rows(); ++i) {
    ar.scores.push_back(test_scores(i, 0));
    ar.labels.push_back(test_data.y(i, 0) > 0.5);
    ar.predicted.push_back(test_scores(i, 0) >= result.head.threshold);
    score_of[test_ids[static_cast<std::size_t>(i)]] = test_scores(i, 0);
  }
  const auto ar_json = evaluate_ar(ar, config.bootstrap_resamples, config.bootstrap_seed);
  result.test_f1 = ar_json["test"]["f1"].get<double>();

  // Action detection on the untrimmed test videos.
  std::set<std::string> test_sources;
  for (const auto* r : manifest.in_split(Split::test)) test_sources.insert(r->group());
  std::vector<DetectionResult> oracle;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!test_sources.count(sources[s].seq.video_id)) continue;
    std::vector<double> sc, truth_sc;
    for (const auto& w : windows[s]) {
      sc.push_back(score_of.at(w.clip_id));
      double overlap = 0.0;
      for (const auto& t : sources[s].truth) overlap = std::max(overlap, t_iou(w.interval(), t));
      truth_sc.push_back(overlap > 0.0 ? 1.0 : 0.0);
    }
    result.detections.push_back(localize_scores(sources[s].seq.video_id, windows[s], sc,
                                                result.head.threshold, sources[s].truth));
    oracle.push_back(localize_scores(sources[s].seq.video_id, windows[s], truth_sc, 0.5, sources[s].truth));
  }
  nlohmann::json ad = nlohmann::json::object(), ad_oracle = nlohmann::json::object();
  nlohmann::json det_json = nlohmann::json::array();
  for (double thr : config.tiou_thresholds) {
    const std::string key = nlohmann::json(thr).dump();
    ad[key] = to_json(evaluate_detection(result.detections, thr, config.bootstrap_seed, config.bootstrap_resamples));
    ad[key]["full_test_ap"] = detection_ap(result.detections, thr).ap;
    ad_oracle[key] = to_json(evaluate_detection(oracle, thr, config.bootstrap_seed, config.bootstrap_resamples));
    for (const auto& d : result.detections) det_json.push_back(to_json(d, thr));
  }
  write_json(out_dir / "detections.json", {{"config_hash", hash}, {"results", det_json}});

  result.report = {{"config_hash", hash},
                   {"config", to_json(config)},
                   {"backbone", embedder->identity()},
                   {"selector", std::string(to_string(config.selector))},
                   {"k", config.k},
                   {"n_sources", sources.size()},
                   {"n_train_clips", train_data.size()},
                   {"n_test_clips", test_data.size()},
                   {"n_test_videos", result.detections.size()},
                   {"cv", {{"chosen", to_json(result.cv.chosen)}, {"chosen_mean_" + to_string(plan.metric), result.cv.chosen_mean}}},
                   {"threshold", result.head.threshold},
                   {"ar", ar_json},
                   {"ad", ad},
                   {"ad_oracle", ad_oracle}};
  write_json(out_dir / "report.json", result.report);
  std::ofstream(out_dir / "summary.txt", std::ios::trunc)
      << summary_table({{"MARINE " + embedder->identity() + " (" + std::string(to_string(config.selector)) + ")", ar_json}});
  return result;
}

/// Motion-based vs evenly-spaced selection over several seeded datasets.
inline nlohmann::json run_ablation(const RunConfig& base, std::size_t runs) {
  nlohmann::json rows = nlohmann::json::array();
  std::size_t strictly_better = 0, at_least = 0;
  double sum_motion = 0.0, sum_even = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    double f1[2];
    for (int m = 0; m < 2; ++m) {
      RunConfig c = base;
      c.selector = m == 0 ? SelectionMethod::motion_based : SelectionMethod::evenly_spaced;
      c.synthetic.seed = derive_seed(base.synthetic.seed, {r});
      c.split_seed = derive_seed(base.split_seed, {r});
      c.cv.seed = derive_seed(base.cv.seed, {r});
      c.output_dir = (fs::path(base.output_dir) / ("run_" + std::to_string(r))).string();
      f1[m] = run_pipeline(c).test_f1;
    }
    strictly_better += f1[0] > f1[1];
    at_least += f1[0] >= f1[1];
    sum_motion += f1[0];
    sum_even += f1[1];
    rows.push_back({{"run", r}, {"motion_based_f1", f1[0]}, {"evenly_spaced_f1", f1[1]}});
  }
  nlohmann::json out = {{"runs", rows},
                        {"motion_strictly_better", strictly_better},
                        {"motion_at_least_as_good", at_least},
                        {"mean_motion_f1", sum_motion / static_cast<double>(runs)},
                        {"mean_even_f1", sum_even / static_cast<double>(runs)},
                        {"config_hash", config_hash(base)}};
  write_json(fs::path(base.output_dir) / "ablation.json", out);
  return out;
}

}  // namespace marine
