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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "marine/modelselect.hpp"

namespace marine {
namespace {

std::vector<std::string> group_ids(std::size_t groups, std::size_t per_group) {
  std::vector<std::string> g;
  for (std::size_t v = 0; v < groups; ++v)
    for (std::size_t c = 0; c < per_group; ++c) g.push_back("video" + std::to_string(v));
  return g;
}

TEST(Folds, NineGroupsThreePerFold) {
  const auto g = group_ids(9, 5);
  const auto f = make_folds(g, {}, 3, 1);
  std::map<std::size_t, std::set<std::string>> per_fold;
  for (std::size_t i = 0; i < g.size(); ++i) per_fold[f[i]].insert(g[i]);
  ASSERT_EQ(per_fold.size(), 3u);
  for (const auto& [fold, groups] : per_fold) EXPECT_EQ(groups.size(), 3u);
}

TEST(Folds, GroupsNeverStraddleAndBalanceWithinOne) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n_groups = 3 + rng.below(20);
    std::vector<std::string> g;
    std::vector<int> pos;
    for (std::size_t v = 0; v < n_groups; ++v)
      for (std::uint64_t c = 0, n = 1 + rng.below(6); c < n; ++c) {
        g.push_back("v" + std::to_string(v));
        pos.push_back(rng.bernoulli(0.3));
      }
    const auto f = make_folds(g, pos, 3, rep);
    std::map<std::string, std::size_t> fold_of;
    std::vector<std::set<std::string>> members(3);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ASSERT_LT(f[i], 3u);
      auto [it, fresh] = fold_of.emplace(g[i], f[i]);
      EXPECT_EQ(it->second, f[i]);
      members[f[i]].insert(g[i]);
    }
    const auto [lo, hi] = std::minmax({members[0].size(), members[1].size(), members[2].size()});
    EXPECT_LE(hi - lo, 1u);
    EXPECT_EQ(f, make_folds(g, pos, 3, rep));
  }
}

TEST(Folds, TooFewGroups) {
  EXPECT_THROW(make_folds(group_ids(2, 4), {}, 3, 0), DataError);
  EXPECT_THROW(make_folds(group_ids(4, 1), {}, 1, 0), DataError);
}

// Twelve videos of five clips; the middle clip is the positive one and is
// separated along the first feature.
CvData separable(std::size_t videos, std::uint64_t seed) {
  Rng rng(seed);
  CvData d;
  d.x = Matrix(videos * 5, 4);
  d.y = Matrix(videos * 5, 1);
  d.groups = group_ids(videos, 5);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    const bool pos = i % 5 == 2;
    for (Eigen::Index c = 0; c < 4; ++c) d.x(i, c) = rng.normal() * 0.3;
    d.x(i, 0) += pos ? 2.0 : -1.0;
    d.y(i, 0) = pos;
  }
  return d;
}

CvPlan quick_plan() {
  CvPlan p = CvPlan::for_task(Task::binary);
  p.seed = 4;
  p.workers = 1;
  return p;
}

TEST(CrossValidate, CoversWholeGrid) {
  const auto plan = quick_plan();
  ASSERT_EQ(plan.grid().size(), 36u);
  const auto r = cross_validate(plan, separable(12, 1));
  ASSERT_EQ(r.rows.size(), 36u);
  std::set<std::tuple<int, double, double>> seen;
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.fold_metrics.size(), 3u);
    seen.insert({row.point.hidden_layers, row.point.dropout_rate, row.point.learning_rate});
    EXPECT_LE(row.mean, r.chosen_mean);
  }
  EXPECT_EQ(seen.size(), 36u);
}

TEST(CrossValidate, ChoosesSimplestAmongBest) {
  const auto r = cross_validate(quick_plan(), separable(12, 2));
  for (const auto& row : r.rows)
    if (row.mean == r.chosen_mean) EXPECT_FALSE(row.point < r.chosen);
}

TEST(CrossValidate, PerfectConfigIsChosen) {
  auto plan = quick_plan();
  plan.hidden_layers = {0};
  plan.dropout_rates = {0.0};
  plan.learning_rates = {0.01, 1e-7};
  const auto r = cross_validate(plan, separable(60, 3));
  const auto& fast = r.rows[0].point.learning_rate == 0.01 ? r.rows[0] : r.rows[1];
  ASSERT_EQ(fast.mean, 1.0);
  EXPECT_EQ(r.chosen.learning_rate, 0.01);
}

TEST(CrossValidate, IndependentOfGridOrderAndWorkers) {
  auto plan = quick_plan();
  plan.hidden_layers = {0, 2};
  plan.learning_rates = {0.01, 0.0001};
  const auto data = separable(9, 5);
  const auto a = cross_validate(plan, data);
  auto reversed = plan;
  std::reverse(reversed.hidden_layers.begin(), reversed.hidden_layers.end());
  std::reverse(reversed.dropout_rates.begin(), reversed.dropout_rates.end());
  std::reverse(reversed.learning_rates.begin(), reversed.learning_rates.end());
  reversed.workers = 3;
  const auto b = cross_validate(reversed, data);
  EXPECT_EQ(a.chosen, b.chosen);
  EXPECT_EQ(a.fold_assignment, b.fold_assignment);
  for (const auto& ra : a.rows) {
    const auto it = std::find_if(b.rows.begin(), b.rows.end(),
                                 [&](const CvRow& rb) { return rb.point == ra.point; });
    ASSERT_NE(it, b.rows.end());
    EXPECT_EQ(it->fold_metrics, ra.fold_metrics);
  }
}

TEST(CrossValidate, SingleClassFoldsFail) {
  auto data = separable(6, 1);
  // Positives only in the first video: at most one fold can contain them.
  for (Eigen::Index i = 5; i < data.y.rows(); ++i) data.y(i, 0) = 0;
  auto plan = quick_plan();
  plan.hidden_layers = {0};
  plan.dropout_rates = {0.0};
  plan.learning_rates = {0.01};
  EXPECT_THROW(cross_validate(plan, data), DataError);
}

TEST(CrossValidate, InputErrors) {
  auto data = separable(6, 1);
  data.groups.pop_back();
  EXPECT_THROW(cross_validate(quick_plan(), data), InvalidInput);
  auto plan = quick_plan();
  plan.folds = 1;
  EXPECT_THROW(cross_validate(plan, separable(6, 1)), ConfigError);
}

TEST(Finalize, UsesChosenConfigAndEpochs) {
  const auto plan = quick_plan();
  const auto data = separable(12, 7);
  const GridPoint chosen{2, 0.25, 0.001};
  const auto head = finalize(plan, data, chosen);
  EXPECT_EQ(head.config.hidden_layers, 2);
  EXPECT_EQ(head.config.dropout_rate, 0.25);
  EXPECT_EQ(head.config.learning_rate, 0.001);
  EXPECT_EQ(head.metadata.epochs, 1);
  EXPECT_GT(head.threshold, 0.0);
  EXPECT_LT(head.threshold, 1.0);
  const auto again = finalize(plan, data, chosen);
  EXPECT_EQ(again.layers.back().weights, head.layers.back().weights);
  EXPECT_EQ(again.threshold, head.threshold);
  EXPECT_EQ(CvPlan::for_task(Task::multilabel).final_epochs, 10);
  EXPECT_EQ(CvPlan::for_task(Task::multilabel).metric, SelectionMetric::map);
}

TEST(Finalize, MultilabelThresholdFromGrid) {
  Rng rng(2);
  CvData d;
  d.task = Task::multilabel;
  d.x = Matrix(60, 3);
  d.y = Matrix::Zero(60, 3);
  d.groups = group_ids(12, 5);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const Eigen::Index c = i % 3;
    d.y(i, c) = 1;
    for (Eigen::Index k = 0; k < 3; ++k) d.x(i, k) = (k == c ? 2.0 : 0.0) + 0.2 * rng.normal();
  }
  auto plan = CvPlan::for_task(Task::multilabel);
  plan.workers = 1;
  const auto head = finalize(plan, d, {1, 0.0, 0.01});
  EXPECT_EQ(head.metadata.epochs, 10);
  const double t = head.threshold * 10;
  EXPECT_NEAR(t, std::round(t), 1e-9);
}

TEST(CvReportJson, RoundTripsChosenPoint) {
  auto plan = quick_plan();
  plan.hidden_layers = {1};
  plan.dropout_rates = {0.25};
  plan.learning_rates = {0.001};
  const auto r = cross_validate(plan, separable(6, 1));
  const auto j = to_json(r);
  EXPECT_EQ(grid_point_from_json(j.at("chosen")), r.chosen);
  EXPECT_EQ(j.at("rows").size(), 1u);
  EXPECT_EQ(j.at("metric"), "roc_auc");
}

}  // namespace
}  // namespace marine
