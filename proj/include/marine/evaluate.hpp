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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "marine/classify.hpp"
#include "marine/error.hpp"
#include "marine/random.hpp"

namespace marine {

// ---------------------------------------------------------------------------
// Confusion-matrix metrics

struct BinaryConfusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }

  static BinaryConfusion from(std::span<const int> predicted,
                              std::span<const int> truth) {
    if (predicted.size() != truth.size())
      throw InvalidInput("prediction and truth lengths differ");
    BinaryConfusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool p = predicted[i] != 0, t = truth[i] != 0;
      (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn)) += 1;
    }
    return c;
  }
};

struct ConfusionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Undefined ratios (0/0) are reported as 0.
inline ConfusionMetrics confusion_metrics(const BinaryConfusion& c) {
  if (c.total() == 0) throw MetricError("confusion matrix is empty");
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  ConfusionMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// ROC

struct RocPoint {
  double threshold;  // +inf for the (0, 0) endpoint
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// ROC at every unique score (score >= t is positive) with trapezoidal AUC.
/// Tied scores contribute a diagonal segment, which makes the AUC equal to
/// the normalised Mann-Whitney U with ties counted as one half.
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("ROC AUC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({INFINITY, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] ? tp : fp) += 1;
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
    roc.points.push_back({t, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  roc.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapReport {
  std::vector<double> values;  // one per resample, in resample order
  double mean = 0.0;
  double std = 0.0;  // population std (divide by N)
  double half_width_95 = 0.0;
  std::size_t resample_size = 0;
  std::size_t redraws = 0;  // resamples re-drawn because the metric failed
  std::uint64_t seed = 0;

  static BootstrapReport summarise(std::vector<double> values) {
    BootstrapReport r;
    r.values = std::move(values);
    if (r.values.empty()) return r;
    const double n = static_cast<double>(r.values.size());
    // Shifted by the first value so a constant metric gives exactly std 0.
    const double ref = r.values.front();
    double shift = 0.0;
    for (double v : r.values) shift += v - ref;
    r.mean = ref + shift / n;
    double ss = 0.0;
    for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / n);
    r.half_width_95 = 1.96 * r.std;
    return r;
  }
};

/// Draws `size` indices in [0, size) for resample `index`.
using Resampler =
    std::function<std::vector<std::size_t>(std::size_t size, std::size_t index, Rng& rng)>;

inline std::vector<std::size_t> with_replacement(std::size_t size, std::size_t, Rng& rng) {
  std::vector<std::size_t> idx(size);
  for (auto& i : idx) i = rng.below(size);
  return idx;
}

/// Metric evaluated on an index multiset into the test data.
using IndexMetric = std::function<double(std::span<const std::size_t>)>;

inline constexpr std::size_t kMaxRedrawsPerResample = 1000;

/// Resample b uses an Rng seeded with seed + b. A resample on which the metric
/// throws MetricError is re-drawn from the same generator.
inline BootstrapReport bootstrap(const IndexMetric& metric, std::size_t size,
                                 std::size_t resamples, std::uint64_t seed,
                                 const Resampler& resampler = with_replacement) {
  if (size == 0) throw InvalidInput("bootstrap over empty test data");
  if (resamples == 0) throw InvalidInput("bootstrap needs at least one resample");
  std::vector<double> values;
  values.reserve(resamples);
  std::size_t redraws = 0;
  for (std::size_t b = 0; b < resamples; ++b) {
    Rng rng(seed + b);
    for (std::size_t attempt = 0;; ++attempt) {
      const auto idx = resampler(size, b, rng);
      if (idx.size() != size) throw InvalidInput("resampler changed the sample size");
      try {
        values.push_back(metric(idx));
        break;
      } catch (const MetricError&) {
        if (attempt + 1 >= kMaxRedrawsPerResample) throw;
        ++redraws;
      }
    }
  }
  auto report = BootstrapReport::summarise(std::move(values));
  report.resample_size = size;
  report.redraws = redraws;
  report.seed = seed;
  return report;
}

// ---------------------------------------------------------------------------
// Temporal localisation

struct TimeInterval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool valid() const { return start >= 0.0 && start < end; }
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

/// Temporal IoU: overlap length over the length of the union.
inline double t_iou(const TimeInterval& a, const TimeInterval& b) {
  if (!a.valid() || !b.valid()) throw InvalidInput("t_iou on an invalid interval");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return inter / uni;
}

struct IntervalMatch {
  TimeInterval predicted;
  double best_t_iou = 0.0;       // against any truth
  double matched_t_iou = 0.0;    // against its assigned truth, 0 if none
  int matched_truth = -1;
  bool correct = false;
};

struct VideoPrecision {
  std::vector<IntervalMatch> matches;
  double precision = 0.0;
};

/// One-to-one greedy matching: candidate pairs with t-IoU >= threshold are
/// taken highest first (ties by prediction, then truth index).
inline VideoPrecision match_intervals(std::span<const TimeInterval> predicted,
                                      std::span<const TimeInterval> truth,
                                      double threshold) {
  VideoPrecision v;
  struct Pair {
    double iou;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    IntervalMatch m{predicted[p]};
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double iou = t_iou(predicted[p], truth[t]);
      m.best_t_iou = std::max(m.best_t_iou, iou);
      if (iou >= threshold && iou > 0.0) pairs.push_back({iou, p, t});
    }
    v.matches.push_back(m);
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<bool> truth_used(truth.size(), false);
  std::size_t correct = 0;
  for (const Pair& pr : pairs) {
    if (v.matches[pr.p].correct || truth_used[pr.t]) continue;
    truth_used[pr.t] = true;
    v.matches[pr.p].correct = true;
    v.matches[pr.p].matched_truth = static_cast<int>(pr.t);
    v.matches[pr.p].matched_t_iou = pr.iou;
    ++correct;
  }
  v.precision = predicted.empty()
                    ? 0.0
                    : static_cast<double>(correct) / static_cast<double>(predicted.size());
  return v;
}

struct DetectionAp {
  double ap = 0.0;  // mean of per-video precision
  std::vector<VideoPrecision> per_video;
};

/// Detection AP as used for untrimmed clips here: the mean over videos of
/// the precision of each video's predicted intervals.
inline DetectionAp detection_ap(const std::vector<std::vector<TimeInterval>>& predictions,
                                const std::vector<std::vector<TimeInterval>>& truths,
                                double threshold) {
  if (predictions.size() != truths.size())
    throw InvalidInput("prediction and truth video counts differ");
  if (predictions.empty()) throw InvalidInput("detection_ap over zero videos");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw InvalidInput("t-IoU threshold must be in (0, 1]");
  DetectionAp out;
  double sum = 0.0;
  for (std::size_t v = 0; v < predictions.size(); ++v) {
    if (truths[v].empty())
      throw InvalidInput("video " + std::to_string(v) + " has no ground-truth interval");
    out.per_video.push_back(match_intervals(predictions[v], truths[v], threshold));
    sum += out.per_video.back().precision;
  }
  out.ap = sum / static_cast<double>(predictions.size());
  return out;
}

// ---------------------------------------------------------------------------
// Multi-label ranking AP

struct MultilabelMap {
  std::vector<double> per_class_ap;  // NaN for excluded classes
  std::vector<std::size_t> excluded;  // classes without positives
  double map = 0.0;
};

/// Non-interpolated AP of one class: sum over ranks j of (R_j - R_{j-1}) P_j
/// in descending-score order, ties broken by sample index.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  if (pos == 0) throw MetricError("average precision needs a positive sample");
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  return ap / static_cast<double>(pos);
}

inline MultilabelMap multilabel_map(const Matrix& scores, const Matrix& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols())
    throw InvalidInput("score and label matrices differ in shape");
  MultilabelMap out;
  double sum = 0.0;
  std::size_t included = 0;
  std::vector<double> s(static_cast<std::size_t>(scores.rows()));
  std::vector<int> l(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    bool any = false;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      s[static_cast<std::size_t>(i)] = scores(i, c);
      l[static_cast<std::size_t>(i)] = labels(i, c) > 0.5;
      any |= labels(i, c) > 0.5;
    }
    if (!any) {
      out.per_class_ap.push_back(std::nan(""));
      out.excluded.push_back(static_cast<std::size_t>(c));
      continue;
    }
    out.per_class_ap.push_back(average_precision(s, l));
    sum += out.per_class_ap.back();
    ++included;
  }
  if (included == 0) throw MetricError("no class has a positive sample");
  out.map = sum / static_cast<double>(included);
  return out;
}

// ---------------------------------------------------------------------------
// Chi-square homogeneity

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t buckets = 0;
};

/// Pearson goodness-of-fit of the sample's class counts against the
/// population's class proportions. Classes with expected count < 5 are pooled
/// into one bucket; classes absent from the population are skipped.
inline ChiSquareResult chi2_homogeneity(std::span<const std::size_t> sample,
                                        std::span<const std::size_t> population) {
  if (sample.empty() || sample.size() != population.size())
    throw InvalidInput("chi-square needs equal, non-empty class vectors");
  const double n_sample = std::accumulate(sample.begin(), sample.end(), 0.0);
  const double n_pop = std::accumulate(population.begin(), population.end(), 0.0);
  if (n_sample <= 0.0 || n_pop <= 0.0) throw InvalidInput("chi-square on empty counts");

  std::vector<std::pair<double, double>> buckets;  // (observed, expected)
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t c = 0; c < sample.size(); ++c) {
    if (population[c] == 0) {
      if (sample[c] != 0)
        throw InvalidInput("class " + std::to_string(c) + " absent from population");
      continue;
    }
    const double expected = n_sample * static_cast<double>(population[c]) / n_pop;
    if (expected < 5.0) {
      pooled_obs += static_cast<double>(sample[c]);
      pooled_exp += expected;
    } else {
      buckets.emplace_back(static_cast<double>(sample[c]), expected);
    }
  }
  if (pooled_exp > 0.0) buckets.emplace_back(pooled_obs, pooled_exp);

  ChiSquareResult r;
  r.buckets = buckets.size();
  for (const auto& [o, e] : buckets) r.statistic += (o - e) * (o - e) / e;
  if (buckets.size() < 2) return r;  // nothing to test: p = 1
  r.dof = buckets.size() - 1;
  r.p_value = r.statistic <= 0.0
                  ? 1.0
                  : boost::math::gamma_q(static_cast<double>(r.dof) / 2.0, r.statistic / 2.0);
  return r;
}

}  // namespace marine
