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

// marine: command-line front end. Each subcommand is one pipeline stage;
// `run` executes all of them from a single JSON config.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "marine/stages.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw marine::ConfigError("cannot open " + p.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos || line[a] == '#') continue;
    out.push_back(line.substr(a, line.find_last_not_of(" \t\r") - a + 1));
  }
  return out;
}

marine::CvPlan load_plan(const std::string& config_path, marine::Task task) {
  marine::CvPlan plan = marine::CvPlan::for_task(task);
  if (!config_path.empty()) {
    const auto rc = marine::load_run_config(config_path);
    const auto d = marine::CvPlan::for_task(task);
    plan = rc.cv;
    // Epoch counts default by task unless the config sets them.
    std::ifstream in(config_path);
    const auto j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("cv")) {
      if (!j["cv"].contains("final_epochs")) plan.final_epochs = d.final_epochs;
      if (!j["cv"].contains("metric")) plan.metric = d.metric;
    } else {
      plan.final_epochs = d.final_epochs;
      plan.metric = d.metric;
    }
  }
  return plan;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marine animal action recognition and detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "marine 0.1.0");

  // ---- synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic blob videos with ground truth");
  std::string synth_out, synth_config;
  marine::SyntheticSpec spec;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--spec", synth_config, "JSON synthetic spec (flags override)");
  synth->add_option("--videos", spec.n_videos, "Number of source videos");
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--event-fraction", spec.event_fraction, "Event share of the centre clip");
  synth->add_option("--noise", spec.noise_sigma, "Pixel noise sigma");

  // ---- slice
  auto* slice = app.add_subcommand("slice", "Cut reef videos into five clips each; centre clip positive");
  std::string slice_dir, slice_out;
  double slice_len = 2.0, slice_fps = 0.0;
  slice->add_option("--videos", slice_dir, "Directory of video files or frame directories")->required();
  slice->add_option("--clip-length", slice_len, "Clip length in seconds");
  slice->add_option("--fps", slice_fps, "Frame rate for frame directories without meta.json");
  slice->add_option("--out", slice_out, "Output manifest (JSON Lines)")->required();

  // ---- filter-ak
  auto* filter = app.add_subcommand("filter-ak", "Filter Animal Kingdom annotations to fish");
  std::string ak_csv, ak_actions, ak_out;
  std::vector<std::string> ak_groups{"fish"};
  bool ak_multilabel = false;
  filter->add_option("--annotations", ak_csv, "Annotation CSV")->required();
  filter->add_option("--actions", ak_actions, "Known action vocabulary, one per line");
  filter->add_option("--groups", ak_groups, "Species groups counted as fish");
  filter->add_flag("--multilabel", ak_multilabel, "Keep every action label (multi-label task)");
  filter->add_option("--out", ak_out, "Output manifest")->required();

  // ---- split
  auto* split = app.add_subcommand("split", "Grouped train/test split by source video");
  std::string split_in, split_out;
  double split_frac = 0.2;
  std::uint64_t split_seed = 1;
  split->add_option("--manifest", split_in)->required();
  split->add_option("--test-fraction", split_frac);
  split->add_option("--seed", split_seed);
  split->add_option("--out", split_out)->required();

  // ---- sample-ak
  auto* sample = app.add_subcommand("sample-ak", "Draw a label-representative subset");
  std::string sample_in, sample_out;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 1;
  double sample_p = marine::kRepresentativeMinP;
  sample->add_option("--manifest", sample_in)->required();
  sample->add_option("--n", sample_n, "Sample size")->required();
  sample->add_option("--seed", sample_seed);
  sample->add_option("--min-p", sample_p, "Chi-square acceptance level");
  sample->add_option("--out", sample_out)->required();

  // ---- select-frames
  auto* select = app.add_subcommand("select-frames", "Select k frames per clip");
  std::string sel_manifest, sel_out, sel_method = "motion_based";
  std::size_t sel_k = 10;
  int sel_down = 1;
  select->add_option("--manifest", sel_manifest)->required();
  select->add_option("--method", sel_method, "motion_based | evenly_spaced");
  select->add_option("--k", sel_k);
  select->add_option("--downscale", sel_down, "Pool frames before differencing");
  select->add_option("--out", sel_out, "Output directory, one JSON per clip")->required();

  // ---- extract
  auto* extract = app.add_subcommand("extract", "Select frames and embed them into MARF features");
  std::string ex_manifest, ex_out, ex_method = "motion_based", ex_backend = "mock", ex_model, ex_out_manifest;
  std::size_t ex_k = 10;
  int ex_down = 1;
  double ex_fps = 0.0;
  extract->add_option("--manifest", ex_manifest)->required();
  extract->add_option("--method", ex_method);
  extract->add_option("--k", ex_k);
  extract->add_option("--downscale", ex_down);
  extract->add_option("--backend", ex_backend, "mock | onnx_model | feature_store");
  extract->add_option("--model", ex_model, "ONNX file or feature-store directory");
  extract->add_option("--fps", ex_fps);
  extract->add_option("--out-dir", ex_out, "Feature directory")->required();
  extract->add_option("--out-manifest", ex_out_manifest, "Manifest with feature paths")->required();

  // ---- cv
  auto* cv = app.add_subcommand("cv", "Grid search with grouped k-fold cross-validation");
  std::string cv_manifest, cv_config, cv_out;
  std::uint64_t cv_seed = 0;
  std::size_t cv_workers = marine::default_workers();
  cv->add_option("--manifest", cv_manifest, "Manifest with feature paths")->required();
  cv->add_option("--config", cv_config, "Run config whose cv section sets the plan");
  cv->add_option("--seed", cv_seed);
  cv->add_option("--workers", cv_workers);
  cv->add_option("--out", cv_out)->required();

  // ---- train
  auto* train = app.add_subcommand("train", "Train the final head on all training records");
  std::string tr_manifest, tr_cv, tr_config, tr_out;
  train->add_option("--manifest", tr_manifest)->required();
  train->add_option("--cv-report", tr_cv, "Report from `cv`")->required();
  train->add_option("--config", tr_config);
  train->add_option("--out", tr_out, "Head JSON")->required();

  // ---- predict
  auto* pred = app.add_subcommand("predict", "Score clips with a trained head");
  std::string pr_manifest, pr_head, pr_split = "test", pr_out;
  pred->add_option("--manifest", pr_manifest)->required();
  pred->add_option("--head", pr_head)->required();
  pred->add_option("--split", pr_split, "train | test | all");
  pred->add_option("--out", pr_out)->required();

  // ---- eval-ar
  auto* evar = app.add_subcommand("eval-ar", "Bootstrap action-recognition metrics");
  std::string ea_pred, ea_out, ea_summary, ea_name = "MARINE";
  std::size_t ea_resamples = 100;
  std::uint64_t ea_seed = 2;
  evar->add_option("--predictions", ea_pred)->required();
  evar->add_option("--resamples", ea_resamples);
  evar->add_option("--seed", ea_seed);
  evar->add_option("--name", ea_name, "Model name in the summary table");
  evar->add_option("--summary", ea_summary, "Plain-text summary table");
  evar->add_option("--out", ea_out)->required();

  // ---- eval-ad
  auto* evad = app.add_subcommand("eval-ad", "Bootstrap action-detection AP at t-IoU thresholds");
  std::string ed_pred, ed_truth, ed_out;
  std::vector<double> ed_thr{0.5, 0.25};
  std::size_t ed_resamples = 100;
  std::uint64_t ed_seed = 2;
  evad->add_option("--predictions", ed_pred, "Clip predictions with time intervals")->required();
  evad->add_option("--ground-truth", ed_truth, "JSON Lines {source_video, intervals}")->required();
  evad->add_option("--tiou", ed_thr);
  evad->add_option("--resamples", ed_resamples);
  evad->add_option("--seed", ed_seed);
  evad->add_option("--out", ed_out)->required();

  // ---- run / ablate
  std::string run_config, run_out, run_selector, run_backend, run_model;
  std::size_t run_k = 0, run_workers = 0, ablate_runs = 10;
  auto add_run_options = [&](CLI::App* c) {
    c->add_option("--config", run_config, "Run config JSON")->required();
    c->add_option("--out", run_out, "Output directory (overrides config)");
    c->add_option("--selector", run_selector, "Override the frame selector");
    c->add_option("--k", run_k, "Override k");
    c->add_option("--backend", run_backend, "Override the embedder backend");
    c->add_option("--model", run_model, "Override the model path");
    c->add_option("--workers", run_workers, "Worker threads");
  };
  auto* run = app.add_subcommand("run", "Run the whole pipeline from a config");
  add_run_options(run);
  auto* ablate = app.add_subcommand("ablate", "Motion-based vs evenly-spaced selection over seeded runs");
  add_run_options(ablate);
  ablate->add_option("--runs", ablate_runs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : marine::exit_code(marine::ErrorKind::config);
  }

  try {
    if (*synth) {
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        if (!in) throw marine::ConfigError("cannot open " + synth_config);
        const auto base = marine::synthetic_spec_from_json(json::parse(in));
        // Flags given on the command line win over the file.
        const auto flags = spec;
        spec = base;
        if (synth->count("--videos")) spec.n_videos = flags.n_videos;
        if (synth->count("--seed")) spec.seed = flags.seed;
        if (synth->count("--event-fraction")) spec.event_fraction = flags.event_fraction;
        if (synth->count("--noise")) spec.noise_sigma = flags.noise_sigma;
      }
      spec.validate();
      fs::create_directories(synth_out);
      std::vector<std::pair<std::string, std::vector<marine::TimeInterval>>> truth;
      for (std::size_t i = 0; i < spec.n_videos; ++i) {
        auto v = marine::generate_video(spec, i);
        marine::write_frame_directory(v.seq, fs::path(synth_out) / v.seq.video_id);
        truth.emplace_back(v.seq.video_id, v.truth);
      }
      marine::write_ground_truth(fs::path(synth_out) / "ground_truth.jsonl", truth);
      marine::write_json(fs::path(synth_out) / "spec.json", marine::to_json(spec));
      std::cout << "wrote " << spec.n_videos << " videos to " << synth_out << "\n";
    } else if (*slice) {
      std::vector<marine::SourceVideo> videos;
      marine::DecodeConfig dc;
      if (slice_fps > 0) dc.fps = slice_fps;
      const fs::path out_dir = fs::absolute(slice_out).parent_path();
      for (const auto& p : marine::list_media(slice_dir)) {
        const auto seq = marine::decode_video(p, dc);
        videos.push_back({seq.video_id, seq.n_frames(), seq.fps,
                          fs::relative(fs::absolute(p), out_dir).string()});
      }
      if (videos.empty()) throw marine::DataError("no videos in " + slice_dir);
      const auto m = marine::slice_coral_reef(videos, slice_len);
      marine::write_manifest(slice_out, m.records);
      std::cout << "sliced " << videos.size() << " videos into " << m.records.size() << " clips\n";
    } else if (*filter) {
      const auto rows = marine::read_ak_annotations(ak_csv);
      std::vector<marine::ManifestRecord> records;
      if (ak_multilabel) {
        std::set<std::string> groups(ak_groups.begin(), ak_groups.end());
        std::vector<marine::AkAnnotation> fish;
        for (const auto& r : rows)
          if (groups.count(marine::normalize_label(r.species_group))) fish.push_back(r);
        records = marine::ak_multilabel_manifest(fish).records;
      } else {
        std::set<std::string> known;
        if (!ak_actions.empty())
          for (const auto& a : read_lines(ak_actions)) known.insert(marine::normalize_label(a));
        std::set<std::string> groups;
        for (const auto& g : ak_groups) groups.insert(marine::normalize_label(g));
        const auto res = marine::filter_ak_fish(rows, known, groups);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        records = res.manifest.records;
      }
      marine::write_manifest(ak_out, records);
      std::cout << "kept " << records.size() << " videos\n";
    } else if (*split) {
      auto m = marine::load_manifest(split_in);
      m = marine::split_grouped(std::move(m), split_frac, split_seed);
      marine::write_manifest(split_out, m.records);
      std::cout << "train " << m.in_split(marine::Split::train).size() << ", test "
                << m.in_split(marine::Split::test).size() << "\n";
    } else if (*sample) {
      const auto m = marine::load_manifest(sample_in);
      const auto res = marine::representative_sample(m, sample_n, sample_seed, sample_p);
      marine::write_manifest(sample_out, res.manifest.records);
      print_json({{"n", res.manifest.records.size()},
                  {"chi2", res.chi2.statistic},
                  {"dof", res.chi2.dof},
                  {"p_value", res.chi2.p_value},
                  {"classes_kept", res.classes_kept},
                  {"attempts", res.attempts}});
    } else if (*select) {
      const auto method = marine::parse_selection_method(sel_method);
      const auto m = marine::read_manifest(sel_manifest);
      marine::ClipSource clips(fs::absolute(sel_manifest).parent_path());
      fs::create_directories(sel_out);
      for (const auto& r : m) {
        marine::FrameSelection s;
        try {
          s = marine::select_frames(clips.frames(r), method, sel_k, {sel_down});
        } catch (const marine::Error& e) {
          throw marine::DataError("select-frames " + r.video_id + ": " + e.what());
        }
        json j = {{"video_id", r.video_id}, {"method", marine::to_string(s.method)}, {"k", s.k},
                  {"indices", s.indices}, {"scores", nullptr}};
        if (s.scores) j["scores"] = *s.scores;
        marine::write_json(fs::path(sel_out) / (r.video_id + ".json"), j);
      }
      std::cout << "selected frames for " << m.size() << " clips\n";
    } else if (*extract) {
      marine::EmbedderConfig ec{ex_backend, ex_model};
      if (ec.backend != "mock" && (ec.model_path.empty() || !fs::exists(ec.model_path)))
        throw marine::ConfigError("model file not found: '" + ec.model_path + "'");
      const auto embedder = marine::make_embedder(ec);
      const auto method = marine::parse_selection_method(ex_method);
      auto records = marine::read_manifest(ex_manifest);
      marine::DecodeConfig dc;
      if (ex_fps > 0) dc.fps = ex_fps;
      marine::ClipSource clips(fs::absolute(ex_manifest).parent_path(), dc);
      const auto cache = marine::FeatureCache::open(
          ex_out, embedder->identity(), method, ex_k,
          {{"manifest", fs::absolute(ex_manifest).string()}, {"selector", marine::to_string(method)},
           {"k", ex_k}, {"downscale", ex_down}, {"backbone", embedder->identity()}});
      const fs::path man_dir = fs::absolute(ex_out_manifest).parent_path();
      std::size_t reused = 0;
      for (auto& r : records) {
        const fs::path p = cache.path_for(r.video_id);
        if (!fs::exists(p)) {
          try {
            const auto frames = clips.frames(r);
            const auto sel = marine::select_frames(frames, method, ex_k, {ex_down});
            marine::write_feature(p, marine::build_video_feature(*embedder, r.video_id, frames, sel));
          } catch (const marine::NumericError& e) {
            throw marine::NumericError("extract " + r.video_id + ": " + e.what());
          } catch (const marine::Error& e) {
            throw marine::DataError("extract " + r.video_id + ": " + e.what());
          }
        } else {
          ++reused;
        }
        r.feature_path = fs::relative(fs::absolute(p), man_dir).string();
      }
      marine::write_manifest(ex_out_manifest, records);
      std::cout << "extracted " << records.size() - reused << " features (" << reused << " cached)\n";
    } else if (*cv) {
      const auto m = marine::load_manifest(cv_manifest);
      auto plan = load_plan(cv_config, m.task);
      if (cv->count("--seed")) plan.seed = cv_seed;
      plan.workers = cv_workers;
      const auto data = marine::cv_data_from_records(m, m.in_split(marine::Split::train),
                                                     fs::absolute(cv_manifest).parent_path());
      const auto report = marine::cross_validate(plan, data);
      auto j = marine::to_json(report);
      j["plan"] = {{"seed", plan.seed}, {"final_epochs", plan.final_epochs}, {"batch_size", plan.batch_size},
                   {"cv_epochs", plan.cv_epochs}, {"metric", marine::to_string(plan.metric)}};
      marine::write_json(cv_out, j);
      std::cout << "chosen " << marine::to_json(report.chosen).dump() << " mean " << report.chosen_mean << "\n";
    } else if (*train) {
      const auto m = marine::load_manifest(tr_manifest);
      auto plan = load_plan(tr_config, m.task);
      std::ifstream in(tr_cv);
      if (!in) throw marine::DataError("cannot open " + tr_cv);
      const auto cvj = json::parse(in);
      const auto chosen = marine::grid_point_from_json(cvj.at("chosen"));
      if (cvj.contains("plan")) {
        plan.seed = cvj["plan"].value("seed", plan.seed);
        if (tr_config.empty()) plan.final_epochs = cvj["plan"].value("final_epochs", plan.final_epochs);
      }
      const auto data = marine::cv_data_from_records(m, m.in_split(marine::Split::train),
                                                     fs::absolute(tr_manifest).parent_path());
      const auto head = marine::finalize(plan, data, chosen);
      marine::save_head(tr_out, head);
      std::cout << "threshold " << head.threshold << "\n";
    } else if (*pred) {
      const auto m = marine::load_manifest(pr_manifest);
      const auto head = marine::load_head(pr_head);
      std::vector<const marine::ManifestRecord*> recs;
      if (pr_split == "all") {
        for (const auto& r : m.records) recs.push_back(&r);
      } else {
        recs = m.in_split(marine::parse_split(pr_split));
      }
      const auto p = marine::predict_records(head, m, recs, fs::absolute(pr_manifest).parent_path());
      marine::write_predictions(pr_out, p);
      std::cout << "scored " << p.records.size() << " clips\n";
    } else if (*evar) {
      const auto p = marine::read_predictions(ea_pred);
      auto j = marine::evaluate_predictions(p, ea_resamples, ea_seed);
      marine::write_json(ea_out, j);
      if (p.label_space.size() == 1) {
        const auto table = marine::summary_table({{ea_name, j}});
        if (!ea_summary.empty()) std::ofstream(ea_summary, std::ios::trunc) << table;
        std::cout << table;
      } else {
        std::printf("mAP %.2f +- %.2f\n", 100.0 * j["bootstrap"]["map"]["mean"].get<double>(),
                    100.0 * j["bootstrap"]["map"]["half_width_95"].get<double>());
      }
    } else if (*evad) {
      const auto p = marine::read_predictions(ed_pred);
      const auto truth = marine::read_ground_truth(ed_truth);
      const auto results = marine::detections_from_predictions(p, truth);
      json out = json::object();
      for (double t : ed_thr) {
        if (!(t > 0.0 && t <= 1.0)) throw marine::ConfigError("t-IoU thresholds must be in (0, 1]");
        auto r = marine::to_json(marine::evaluate_detection(results, t, ed_seed, ed_resamples));
        r["full_test_ap"] = marine::detection_ap(results, t).ap;
        out[json(t).dump()] = r;
        std::printf("AP@%.2f %.2f +- %.2f\n", t, 100.0 * r["mean"].get<double>(),
                    100.0 * r["half_width_95"].get<double>());
      }
      marine::write_json(ed_out, {{"videos", results.size()}, {"ad", out}});
    } else if (*run || *ablate) {
      auto c = marine::load_run_config(run_config);
      if (!run_out.empty()) c.output_dir = run_out;
      if (!run_selector.empty()) c.selector = marine::parse_selection_method(run_selector);
      if (run_k) c.k = run_k;
      if (!run_backend.empty()) c.embedder.backend = run_backend;
      if (!run_model.empty()) c.embedder.model_path = run_model;
      if (run_workers) c.workers = run_workers;
      if (*run) {
        const auto r = marine::run_pipeline(c);
        std::ifstream summary(fs::path(c.output_dir) / "summary.txt");
        std::cout << summary.rdbuf();
        for (const auto& [thr, v] : r.report["ad"].items())
          std::printf("AD AP@%s %.2f +- %.2f\n", thr.c_str(), 100.0 * v["mean"].get<double>(),
                      100.0 * v["half_width_95"].get<double>());
      } else {
        print_json(marine::run_ablation(c, ablate_runs));
      }
    }
  } catch (const marine::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return marine::exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return marine::exit_code(marine::ErrorKind::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return marine::exit_code(marine::ErrorKind::data);
  }
  return 0;
}
