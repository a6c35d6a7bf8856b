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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "marine/stages.hpp"
#include "test_util.hpp"

namespace marine {
namespace {

namespace fs = std::filesystem;

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MARINE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

RunConfig small_run(const fs::path& out) {
  RunConfig c;
  c.synthetic.n_videos = 10;
  c.synthetic.seed = 5;
  c.k = 4;
  c.cv.hidden_layers = {0};
  c.cv.dropout_rates = {0.0};
  c.cv.learning_rates = {0.01};
  c.cv.seed = 1;
  c.bootstrap_resamples = 20;
  c.output_dir = out.string();
  c.workers = 1;
  return c;
}

TEST(RunConfigJson, RoundTripAndHash) {
  RunConfig c = small_run("/tmp/x");
  c.selector = SelectionMethod::evenly_spaced;
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  RunConfig moved = c;
  moved.output_dir = "/tmp/y";
  EXPECT_EQ(config_hash(moved), config_hash(c));
  moved.k = 5;
  EXPECT_NE(config_hash(moved), config_hash(c));
  EXPECT_THROW(run_config_from_json({{"k", "ten"}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"selector", "random"}}), ConfigError);
}

TEST(RunConfigValidate, MissingModelFailsBeforeAnyWork) {
  testing::TempDir dir("pipe_model");
  RunConfig c = small_run(dir / "out");
  c.embedder = {"onnx_model", (dir / "absent.onnx").string()};
  EXPECT_THROW(run_pipeline(c), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "out"));
  c.embedder = {"mock", ""};
  c.tiou_thresholds = {0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_run(dir / "out");
  c.dataset = "videos";
  c.videos_dir = (dir / "nowhere").string();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FeatureCacheKey, MismatchIsRejected) {
  testing::TempDir dir("cache");
  const auto a = FeatureCache::open(dir.path(), "mock-v1", SelectionMethod::motion_based, 10, {{"seed", 1}});
  EXPECT_NO_THROW(FeatureCache::open(dir.path(), "mock-v1", SelectionMethod::motion_based, 10, {{"seed", 1}}));
  EXPECT_THROW(FeatureCache::open(dir.path(), "mock-v1", SelectionMethod::motion_based, 10, {{"seed", 2}}),
               ConfigError);
  const auto b = FeatureCache::open(dir.path(), "mock-v1", SelectionMethod::evenly_spaced, 10, {{"seed", 2}});
  EXPECT_NE(a.dir, b.dir);
  EXPECT_NE(a.path_for("clip"), b.path_for("clip"));
}

TEST(Pipeline, RerunFromCacheIsIdentical) {
  testing::TempDir dir("pipe_rerun");
  const RunConfig c = small_run(dir / "run");
  const auto first = run_pipeline(c);
  const std::string report = slurp(dir / "run" / "report.json");
  ASSERT_FALSE(report.empty());
  fs::remove(dir / "run" / "report.json");
  const auto second = run_pipeline(c);
  EXPECT_EQ(slurp(dir / "run" / "report.json"), report);
  EXPECT_EQ(first.report, second.report);

  const auto j = read_json(dir / "run" / "report.json");
  EXPECT_EQ(j.at("config_hash"), config_hash(c));
  EXPECT_EQ(read_json(dir / "run" / "head.json").at("config_hash"), config_hash(c));
  EXPECT_EQ(read_json(dir / "run" / "cv_report.json").at("config_hash"), config_hash(c));
  EXPECT_EQ(j.at("ar").at("bootstrap").at("accuracy").at("values").size(), 20u);
  for (const auto& m : read_manifest(dir / "run" / "manifest.jsonl"))
    EXPECT_TRUE(fs::exists(dir / "run" / m.feature_path)) << m.feature_path;
}

TEST(Pipeline, SelectorChangeUsesSeparateCache) {
  testing::TempDir dir("pipe_sel");
  RunConfig c = small_run(dir / "run");
  run_pipeline(c);
  c.selector = SelectionMethod::evenly_spaced;
  run_pipeline(c);
  const auto m = read_manifest(dir / "run" / "manifest.jsonl");
  ASSERT_FALSE(m.empty());
  EXPECT_NE(m[0].feature_path.find("evenly_spaced"), std::string::npos);
  std::size_t caches = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "run"))
    caches += e.path().filename() == "cache.json";
  EXPECT_EQ(caches, 2u);
}

TEST(Pipeline, ChangedSettingsRejectStaleCache) {
  testing::TempDir dir("pipe_stale");
  RunConfig c = small_run(dir / "run");
  run_pipeline(c);
  c.synthetic.noise_sigma = 6.0;
  EXPECT_THROW(run_pipeline(c), ConfigError);
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir("cli_codes");
  const auto log = dir / "log.txt";
  EXPECT_EQ(cli("--version", log), 0);
  EXPECT_EQ(cli("", log), 2);
  EXPECT_EQ(cli("frobnicate", log), 2);
  EXPECT_EQ(cli("split --manifest x", log), 2);
  EXPECT_EQ(cli("run --config " + (dir / "missing.json").string(), log), 2);
  EXPECT_EQ(cli("eval-ar --predictions " + (dir / "missing.jsonl").string() + " --out " +
                    (dir / "o.json").string(),
                log),
            3);
  std::ofstream(dir / "cfg.json") << R"({"k": 4, "synthetic": {"n_videos": 6}})";
  EXPECT_EQ(cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "r").string() +
                    " --backend onnx_model --model " + (dir / "none.onnx").string(),
                log),
            2);
  EXPECT_NE(slurp(log).find("model file not found"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "r"));
}

TEST(Cli, StageByStageChain) {
  testing::TempDir dir("cli_chain");
  const auto d = [&](const std::string& s) { return (dir / s).string(); };
  const auto log = dir / "log.txt";
  std::ofstream(d("cfg.json")) << R"({"cv": {"hidden_layers": [0, 1], "dropout_rates": [0.0],
                                     "learning_rates": [0.01], "seed": 3}})";
  ASSERT_EQ(cli("synth --out " + d("videos") + " --videos 10 --seed 3", log), 0) << slurp(log);
  ASSERT_EQ(cli("slice --videos " + d("videos") + " --out " + d("clips.jsonl"), log), 0) << slurp(log);
  EXPECT_EQ(read_manifest(d("clips.jsonl")).size(), 50u);
  ASSERT_EQ(cli("split --manifest " + d("clips.jsonl") + " --seed 2 --out " + d("split.jsonl"), log), 0)
      << slurp(log);
  ASSERT_EQ(cli("select-frames --manifest " + d("split.jsonl") + " --k 4 --out " + d("sel"), log), 0)
      << slurp(log);
  const auto sel = read_json(dir / "sel" / "synth_0000__c2.json");
  EXPECT_EQ(sel.at("indices").size(), 4u);
  const std::string extract = "extract --manifest " + d("split.jsonl") + " --k 4 --out-dir " +
                              d("features") + " --out-manifest " + d("features.jsonl");
  ASSERT_EQ(cli(extract, log), 0) << slurp(log);
  ASSERT_EQ(cli(extract, log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("(50 cached)"), std::string::npos);
  ASSERT_EQ(cli("cv --manifest " + d("features.jsonl") + " --config " + d("cfg.json") + " --workers 2 --out " +
                    d("cv.json"),
                log),
            0)
      << slurp(log);
  EXPECT_EQ(read_json(d("cv.json")).at("rows").size(), 2u);
  ASSERT_EQ(cli("train --manifest " + d("features.jsonl") + " --cv-report " + d("cv.json") + " --config " +
                    d("cfg.json") + " --out " + d("head.json"),
                log),
            0)
      << slurp(log);
  ASSERT_EQ(cli("predict --manifest " + d("features.jsonl") + " --head " + d("head.json") + " --out " +
                    d("pred.jsonl"),
                log),
            0)
      << slurp(log);
  ASSERT_EQ(cli("eval-ar --predictions " + d("pred.jsonl") + " --resamples 30 --summary " + d("summary.txt") +
                    " --out " + d("ar.json"),
                log),
            0)
      << slurp(log);
  const auto ar = read_json(d("ar.json"));
  EXPECT_EQ(ar.at("bootstrap").at("f1").at("values").size(), 30u);
  EXPECT_NE(slurp(d("summary.txt")).find("F1-score"), std::string::npos);
  ASSERT_EQ(cli("eval-ad --predictions " + d("pred.jsonl") + " --ground-truth " + d("videos/ground_truth.jsonl") +
                    " --resamples 30 --out " + d("ad.json"),
                log),
            0)
      << slurp(log);
  const auto ad = read_json(d("ad.json"));
  EXPECT_EQ(ad.at("videos"), 2u);
  EXPECT_EQ(ad.at("ad").at("0.25").at("values").size(), 30u);
  EXPECT_EQ(ad.at("ad").at("0.25").at("resample_size"), 2u);
}

}  // namespace
}  // namespace marine
