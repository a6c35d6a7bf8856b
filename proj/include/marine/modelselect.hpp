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

// Group-aware k-fold cross-validation over the head's hyperparameter grid,
// followed by final training on the whole training split.

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "marine/classify.hpp"
#include "marine/evaluate.hpp"
#include "marine/manifest.hpp"
#include "marine/parallel.hpp"
#include "marine/random.hpp"

namespace marine {

enum class SelectionMetric { roc_auc, map };

struct GridPoint {
  int hidden_layers = 0;
  double dropout_rate = 0.0;
  double learning_rate = 1e-3;

  /// Simplicity order used for tie-breaking: fewer layers, then less
  /// dropout, then smaller learning rate.
  friend bool operator<(const GridPoint& a, const GridPoint& b) {
    return std::tie(a.hidden_layers, a.dropout_rate, a.learning_rate) <
           std::tie(b.hidden_layers, b.dropout_rate, b.learning_rate);
  }
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct CvPlan {
  std::size_t folds = 3;
  std::vector<int> hidden_layers{0, 1, 2, 3};
  std::vector<double> dropout_rates{0.0, 0.25, 0.5};
  std::vector<double> learning_rates{0.01, 0.001, 0.0001};
  SelectionMetric metric = SelectionMetric::roc_auc;
  int cv_epochs = 10;
  int final_epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t max_fold_attempts = 5;
  std::size_t workers = default_workers();

  static CvPlan for_task(Task task) {
    CvPlan p;
    p.metric = task == Task::binary ? SelectionMetric::roc_auc : SelectionMetric::map;
    p.final_epochs = task == Task::binary ? 1 : 10;
    return p;
  }

  std::vector<GridPoint> grid() const {
    std::vector<GridPoint> g;
    for (int h : hidden_layers)
      for (double d : dropout_rates)
        for (double lr : learning_rates) g.push_back({h, d, lr});
    return g;
  }

  void validate() const {
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (grid().empty()) throw ConfigError("hyperparameter grid is empty");
    if (cv_epochs < 0 || final_epochs < 0) throw ConfigError("epochs must be non-negative");
    if (max_fold_attempts == 0) throw ConfigError("max_fold_attempts must be positive");
  }
};

/// Samples for model selection: features, targets and the grouping key of
/// each sample (its source video).
struct CvData {
  Matrix x;
  Matrix y;
  std::vector<std::string> groups;
  Task task = Task::binary;

  Eigen::Index size() const { return x.rows(); }

  /// Per-sample loss weights for training on `rows`: class weights for
  /// binary data, smoothed max-class sample weights for multi-label data.
  TrainingData training_data(std::span<const std::size_t> rows) const {
    TrainingData t{Matrix(rows.size(), x.cols()), Matrix(rows.size(), y.cols()), Vector()};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
      t.y.row(static_cast<Eigen::Index>(i)) = y.row(static_cast<Eigen::Index>(rows[i]));
    }
    t.weights = task == Task::binary ? binary_sample_weights(t.y) : multilabel_sample_weights(t.y);
    return t;
  }

  std::vector<std::size_t> all_rows() const {
    std::vector<std::size_t> r(static_cast<std::size_t>(size()));
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
  }
};

/// Fold id per sample. All samples of a group share a fold; groups are
/// shuffled, ordered by positive count (descending) and dealt to the fold
/// with the fewest groups, then fewest positives, so group counts differ by
/// at most one.
inline std::vector<std::size_t> make_folds(const std::vector<std::string>& groups,
                                           std::span<const int> positives,
                                           std::size_t folds, std::uint64_t seed) {
  if (!positives.empty() && positives.size() != groups.size())
    throw InvalidInput("positives and groups differ in length");
  std::map<std::string, std::size_t> pos_per_group;
  for (std::size_t i = 0; i < groups.size(); ++i)
    pos_per_group[groups[i]] += positives.empty() ? 0 : static_cast<std::size_t>(positives[i] != 0);
  if (folds < 2 || pos_per_group.size() < folds)
    throw DataError("cannot make " + std::to_string(folds) + " folds from " +
                    std::to_string(pos_per_group.size()) + " groups");

  std::vector<std::pair<std::string, std::size_t>> order(pos_per_group.begin(),
                                                          pos_per_group.end());
  Rng rng(derive_seed(seed, {0xf01d}));
  rng.shuffle(std::span(order));
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::size_t> n_groups(folds, 0), n_pos(folds, 0);
  std::map<std::string, std::size_t> fold_of;
  for (const auto& [g, p] : order) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < folds; ++f)
      if (std::tie(n_groups[f], n_pos[f]) < std::tie(n_groups[best], n_pos[best])) best = f;
    fold_of[g] = best;
    ++n_groups[best];
    n_pos[best] += p;
  }
  std::vector<std::size_t> out(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) out[i] = fold_of[groups[i]];
  return out;
}

struct CvRow {
  GridPoint point;
  std::vector<double> fold_metrics;
  double mean = 0.0;
};

struct CvReport {
  std::vector<CvRow> rows;  // grid order
  GridPoint chosen;
  double chosen_mean = 0.0;
  std::vector<std::size_t> fold_assignment;
  std::size_t fold_attempts = 0;
  SelectionMetric metric = SelectionMetric::roc_auc;
  std::optional<double> chosen_threshold;  // set by finalize
};

namespace detail {

inline std::uint64_t grid_point_key(const GridPoint& p) {
  return derive_seed(static_cast<std::uint64_t>(p.hidden_layers),
                     {std::bit_cast<std::uint64_t>(p.dropout_rate),
                      std::bit_cast<std::uint64_t>(p.learning_rate)});
}

inline bool fold_usable(const CvData& data, const std::vector<std::size_t>& fold,
                        std::size_t f) {
  const Eigen::Index classes = data.y.cols();
  std::vector<std::size_t> pos_in(static_cast<std::size_t>(classes), 0),
      pos_out(static_cast<std::size_t>(classes), 0);
  std::size_t n_in = 0, n_out = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const bool held = fold[static_cast<std::size_t>(i)] == f;
    (held ? n_in : n_out) += 1;
    for (Eigen::Index c = 0; c < classes; ++c)
      if (data.y(i, c) > 0.5) ++(held ? pos_in : pos_out)[static_cast<std::size_t>(c)];
  }
  if (data.task == Task::binary)
    return pos_in[0] > 0 && pos_in[0] < n_in && pos_out[0] > 0 && pos_out[0] < n_out;
  const auto any = [](const std::vector<std::size_t>& v) {
    return std::any_of(v.begin(), v.end(), [](std::size_t x) { return x > 0; });
  };
  return any(pos_in) && any(pos_out);
}

inline double selection_score(SelectionMetric metric, const Matrix& scores, const Matrix& y) {
  if (metric == SelectionMetric::map) return multilabel_map(scores, y).map;
  std::vector<double> s(static_cast<std::size_t>(scores.rows()));
  std::vector<int> l(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    s[static_cast<std::size_t>(i)] = scores(i, 0);
    l[static_cast<std::size_t>(i)] = y(i, 0) > 0.5;
  }
  return roc_auc(s, l).auc;
}

}  // namespace detail

inline HeadConfig head_config_for(const CvPlan& plan, const CvData& data,
                                  const GridPoint& p, std::uint64_t seed) {
  HeadConfig c;
  c.input_dim = static_cast<std::size_t>(data.x.cols());
  c.hidden_layers = p.hidden_layers;
  c.n_outputs = static_cast<int>(data.y.cols());
  c.dropout_rate = p.dropout_rate;
  c.learning_rate = p.learning_rate;
  c.batch_size = plan.batch_size;
  c.epochs = plan.cv_epochs;
  c.seed = seed;
  return c;
}

/// Trains every grid point on every fold and picks the best mean held-out
/// score. Job seeds depend on the grid point's values, never its position, so
/// the outcome does not depend on grid enumeration order.
inline CvReport cross_validate(const CvPlan& plan, const CvData& data) {
  plan.validate();
  if (data.size() == 0) throw DataError("cross-validation on empty data");
  if (data.groups.size() != static_cast<std::size_t>(data.size()))
    throw InvalidInput("group list does not match the data");

  std::vector<int> positives(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    positives[static_cast<std::size_t>(i)] = (data.y.row(i).array() > 0.5).any();

  CvReport report;
  report.metric = plan.metric;
  bool usable = false;
  for (std::size_t attempt = 0; attempt < plan.max_fold_attempts && !usable; ++attempt) {
    report.fold_assignment = make_folds(data.groups, positives, plan.folds, plan.seed + attempt);
    report.fold_attempts = attempt + 1;
    usable = true;
    for (std::size_t f = 0; f < plan.folds; ++f)
      usable = usable && detail::fold_usable(data, report.fold_assignment, f);
  }
  if (!usable)
    throw DataError("no usable fold assignment after " + std::to_string(plan.max_fold_attempts) +
                    " attempts: a fold lacks one of the classes");

  std::vector<TrainingData> fold_train(plan.folds);
  std::vector<std::pair<Matrix, Matrix>> fold_held(plan.folds);
  for (std::size_t f = 0; f < plan.folds; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < report.fold_assignment.size(); ++i)
      (report.fold_assignment[i] == f ? out : in).push_back(i);
    fold_train[f] = data.training_data(in);
    const TrainingData held = data.training_data(out);
    fold_held[f] = {held.x, held.y};
  }

  const auto grid = plan.grid();
  const std::size_t jobs = grid.size() * plan.folds;
  std::vector<double> metric(jobs, 0.0);
  parallel_for(jobs, plan.workers, [&](std::size_t job) {
    const GridPoint& p = grid[job / plan.folds];
    const std::size_t f = job % plan.folds;
    const std::uint64_t seed = derive_seed(plan.seed, {detail::grid_point_key(p), f});
    const HeadConfig cfg = head_config_for(plan, data, p, seed);
    const ClassifierHead head = train(cfg, fold_train[f], plan.cv_epochs);
    metric[job] = detail::selection_score(plan.metric, predict(head, fold_held[f].first),
                                          fold_held[f].second);
  });

  bool have = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CvRow row{grid[g], {}, 0.0};
    for (std::size_t f = 0; f < plan.folds; ++f) row.fold_metrics.push_back(metric[g * plan.folds + f]);
    row.mean = std::accumulate(row.fold_metrics.begin(), row.fold_metrics.end(), 0.0) /
               static_cast<double>(plan.folds);
    if (!have || row.mean > report.chosen_mean ||
        (row.mean == report.chosen_mean && row.point < report.chosen)) {
      report.chosen = row.point;
      report.chosen_mean = row.mean;
      have = true;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Trains the chosen configuration on all of `data` for plan.final_epochs and
/// sets the decision threshold from the training-set outputs.
inline ClassifierHead finalize(const CvPlan& plan, const CvData& data, const GridPoint& chosen) {
  const TrainingData all = data.training_data(data.all_rows());
  const std::uint64_t seed = derive_seed(plan.seed, {detail::grid_point_key(chosen), 0xf1a1});
  HeadConfig cfg = head_config_for(plan, data, chosen, seed);
  cfg.epochs = plan.final_epochs;
  ClassifierHead head = train(cfg, all, plan.final_epochs);
  const Matrix scores = predict(head, all.x);
  if (data.task == Task::binary) {
    std::vector<double> s(static_cast<std::size_t>(scores.rows()));
    std::vector<int> l(s.size());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      s[static_cast<std::size_t>(i)] = scores(i, 0);
      l[static_cast<std::size_t>(i)] = all.y(i, 0) > 0.5;
    }
    head.threshold = select_threshold_binary(s, l).threshold;
  } else {
    head.threshold = select_threshold_multilabel(scores, all.y).threshold;
  }
  // A threshold of exactly 0 or 1 can only arise from saturated sigmoids.
  head.threshold = std::clamp(head.threshold, 1e-12, 1.0 - 1e-12);
  return head;
}

inline std::string to_string(SelectionMetric m) {
  return m == SelectionMetric::roc_auc ? "roc_auc" : "map";
}

inline nlohmann::json to_json(const GridPoint& p) {
  return {{"hidden_layers", p.hidden_layers},
          {"dropout_rate", p.dropout_rate},
          {"learning_rate", p.learning_rate}};
}

inline GridPoint grid_point_from_json(const nlohmann::json& j) {
  return {j.at("hidden_layers").get<int>(), j.at("dropout_rate").get<double>(),
          j.at("learning_rate").get<double>()};
}

inline nlohmann::json to_json(const CvReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"config", to_json(row.point)},
                    {"fold_metrics", row.fold_metrics},
                    {"mean", row.mean}});
  nlohmann::json j = {{"metric", to_string(r.metric)},
                      {"rows", rows},
                      {"chosen", to_json(r.chosen)},
                      {"chosen_mean", r.chosen_mean},
                      {"fold_attempts", r.fold_attempts},
                      {"fold_assignment", r.fold_assignment},
                      {"chosen_threshold", nullptr}};
  if (r.chosen_threshold) j["chosen_threshold"] = *r.chosen_threshold;
  return j;
}

}  // namespace marine
