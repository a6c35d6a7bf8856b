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

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "marine/evaluate.hpp"
#include "metric_oracles.hpp"

namespace marine {
namespace {

TEST(Confusion, PerfectCoralReefSizedSet) {
  const auto m = confusion_metrics({44, 0, 176, 0});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Confusion, AllPositiveOnTwentyPercent) {
  std::vector<int> truth(100, 0), pred(100, 1);
  std::fill(truth.begin(), truth.begin() + 20, 1);
  const auto m = confusion_metrics(BinaryConfusion::from(pred, truth));
  EXPECT_DOUBLE_EQ(m.precision, 0.2);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
}

TEST(Confusion, ZeroConventions) {
  const auto m = confusion_metrics({0, 0, 5, 3});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_THROW(confusion_metrics({}), MetricError);
  const int a[] = {1}, b[] = {1, 0};
  EXPECT_THROW(BinaryConfusion::from(a, b), InvalidInput);
}

TEST(Roc, SeparatedAndSingleClass) {
  const double s[] = {0.9, 0.8, 0.3, 0.1};
  const int l[] = {1, 1, 0, 0};
  const auto roc = roc_auc(s, l);
  EXPECT_EQ(roc.auc, 1.0);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  const int one[] = {1, 1, 1, 1};
  EXPECT_THROW(roc_auc(s, one), MetricError);
}

TEST(Roc, RandomScoresNearHalf) {
  Rng rng(2024);
  std::vector<double> s(10000);
  std::vector<int> l(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    l[i] = rng.bernoulli(0.5);
  }
  EXPECT_NEAR(roc_auc(s, l).auc, 0.5, 0.05);
}

TEST(Roc, MatchesMannWhitneyAndSymmetry) {
  Rng rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n), neg(n), mono(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(rep % 2 ? 4 : 1000));
      l[i] = rng.bernoulli(0.4);
      neg[i] = -s[i];
      mono[i] = std::exp(s[i] / 100.0) * 3 + 1;
    }
    l[0] = 1;
    l[1] = 0;
    const double auc = roc_auc(s, l).auc;
    EXPECT_NEAR(auc, testing::mann_whitney_auc(s, l), 1e-12);
    EXPECT_NEAR(auc, 1.0 - roc_auc(neg, l).auc, 1e-12);
    EXPECT_NEAR(auc, roc_auc(mono, l).auc, 1e-12);
  }
}

TEST(Bootstrap, ConstantMetricHasZeroSpread) {
  const auto r = bootstrap([](std::span<const std::size_t>) { return 0.7; }, 10, 100, 1);
  EXPECT_EQ(r.values.size(), 100u);
  EXPECT_EQ(r.resample_size, 10u);
  EXPECT_EQ(r.std, 0.0);
  EXPECT_DOUBLE_EQ(r.mean, 0.7);
}

TEST(Bootstrap, SummaryConsistentWithValues) {
  std::vector<double> data(50);
  Rng rng(5);
  for (auto& d : data) d = rng.uniform();
  auto mean_of = [&](std::span<const std::size_t> idx) {
    double s = 0;
    for (auto i : idx) s += data[i];
    return s / static_cast<double>(idx.size());
  };
  const auto a = bootstrap(mean_of, data.size(), 100, 9);
  const auto b = bootstrap(mean_of, data.size(), 100, 9);
  EXPECT_EQ(a.values, b.values);
  const double m = std::accumulate(a.values.begin(), a.values.end(), 0.0) / 100.0;
  double ss = 0;
  for (double v : a.values) ss += (v - m) * (v - m);
  EXPECT_NEAR(a.mean, m, 1e-12);
  EXPECT_NEAR(a.std, std::sqrt(ss / 100.0), 1e-12);
  EXPECT_NEAR(a.half_width_95, 1.96 * a.std, 1e-12);
}

TEST(Bootstrap, AccuracyMeanNearFullSetValue) {
  Rng rng(31);
  std::vector<int> correct(400);
  for (auto& c : correct) c = rng.bernoulli(0.8);
  const double full = std::accumulate(correct.begin(), correct.end(), 0.0) / 400.0;
  const auto r = bootstrap(
      [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += correct[i];
        return s / static_cast<double>(idx.size());
      },
      correct.size(), 100, 4);
  EXPECT_LE(std::abs(r.mean - full), 1.96 * r.std / std::sqrt(100.0));
}

TEST(Bootstrap, IdentityResampleReproducesMetric) {
  const std::vector<double> data{1, 4, 2, 8};
  auto identity = [](std::size_t n, std::size_t, Rng&) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
  };
  const auto r = bootstrap(
      [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += data[i] * static_cast<double>(i + 1);
        return s;
      },
      4, 1, 0, identity);
  EXPECT_EQ(r.values, std::vector<double>{1 + 8 + 6 + 32});
}

TEST(Bootstrap, RedrawsFailingResamples) {
  int calls = 0;
  const auto r = bootstrap(
      [&](std::span<const std::size_t>) -> double {
        if (++calls % 3 == 0) throw MetricError("single class");
        return 1.0;
      },
      5, 10, 3);
  EXPECT_EQ(r.values.size(), 10u);
  EXPECT_GT(r.redraws, 0u);
  EXPECT_THROW(bootstrap([](std::span<const std::size_t>) -> double { throw MetricError("x"); }, 3, 1, 0),
               MetricError);
  EXPECT_THROW(bootstrap([](std::span<const std::size_t>) { return 0.0; }, 0, 1, 0), InvalidInput);
}

TEST(TIou, HandCases) {
  EXPECT_EQ(t_iou({4, 6}, {5, 7}), 1.0 / 3.0);
  EXPECT_EQ(t_iou({4, 6}, {4, 6}), 1.0);
  EXPECT_EQ(t_iou({0, 1}, {2, 3}), 0.0);
  EXPECT_EQ(t_iou({0, 1}, {1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(t_iou({0, 10}, {4, 6}), 0.2);
  EXPECT_THROW(t_iou({3, 3}, {0, 1}), InvalidInput);
}

TEST(TIou, Properties) {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double a0 = rng.below(20), b0 = rng.below(20);
    const TimeInterval a{a0, a0 + 1 + static_cast<double>(rng.below(6))};
    const TimeInterval b{b0, b0 + 1 + static_cast<double>(rng.below(6))};
    const double v = t_iou(a, b);
    EXPECT_EQ(v, t_iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v == 1.0, a == b);
    EXPECT_EQ(v == 0.0, a.end <= b.start || b.end <= a.start);
  }
}

TEST(DetectionAp, Examples) {
  std::vector<std::vector<TimeInterval>> truth(9, {{4, 6}});
  EXPECT_EQ(detection_ap(truth, truth, 0.5).ap, 1.0);
  EXPECT_EQ(detection_ap({{{0, 10}}}, {{{4, 6}}}, 0.25).ap, 0.0);
  EXPECT_EQ(detection_ap({{}}, {{{4, 6}}}, 0.25).ap, 0.0);
  EXPECT_EQ(detection_ap({{{4, 6}}}, {{{4, 6}}}, 0.5).ap, 1.0);
  EXPECT_THROW(detection_ap({{}}, {{}}, 0.5), InvalidInput);
  EXPECT_THROW(detection_ap({{{4, 6}}}, {{{4, 6}}}, 0.0), InvalidInput);
}

TEST(DetectionAp, OneToOneMatching) {
  // Two predictions overlap the same truth; only one can be correct.
  const auto r = detection_ap({{{4, 6}, {4, 6.5}}}, {{{4, 6}}}, 0.5);
  EXPECT_DOUBLE_EQ(r.ap, 0.5);
  EXPECT_TRUE(r.per_video[0].matches[0].correct);
  EXPECT_FALSE(r.per_video[0].matches[1].correct);
}

TEST(DetectionAp, MonotoneInThreshold) {
  Rng rng(10);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::vector<TimeInterval>> pred(3), truth(3);
    for (int v = 0; v < 3; ++v) {
      for (std::uint64_t i = 0, n = rng.below(4); i < n; ++i) {
        const double s = rng.below(10);
        pred[v].push_back({s, s + 1 + static_cast<double>(rng.below(4))});
      }
      const double s = rng.below(10);
      truth[v].push_back({s, s + 2});
    }
    double prev = 1.0;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
      const double ap = detection_ap(pred, truth, t).ap;
      EXPECT_LE(ap, prev + 1e-15);
      prev = ap;
    }
  }
}

TEST(AveragePrecision, WorkedExample) {
  const double s[] = {0.9, 0.7, 0.5, 0.3};
  const int l[] = {1, 0, 1, 0};
  EXPECT_NEAR(average_precision(s, l), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  const int sorted[] = {1, 1, 0, 0};
  EXPECT_EQ(average_precision(s, sorted), 1.0);
}

TEST(MultilabelMap, ExcludesEmptyClasses) {
  Matrix s(3, 3), y(3, 3);
  s << 0.9, 0.1, 0.5, 0.2, 0.8, 0.5, 0.4, 0.3, 0.5;
  y << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  const auto m = multilabel_map(s, y);
  EXPECT_EQ(m.excluded, std::vector<std::size_t>{2});
  EXPECT_TRUE(std::isnan(m.per_class_ap[2]));
  EXPECT_EQ(m.map, 1.0);
  EXPECT_THROW(multilabel_map(s, Matrix::Zero(3, 3)), MetricError);
}

TEST(MultilabelMap, ExhaustiveSmallOracle) {
  const auto r = testing::exhaustive_map_oracle(77);
  EXPECT_GT(r.cases, 4000u);
  EXPECT_EQ(r.mismatches, 0u);
}

TEST(ChiSquare, ProportionalSampleHasPOne) {
  const std::size_t pop[] = {500, 300, 200}, sample[] = {50, 30, 20};
  const auto r = chi2_homogeneity(sample, pop);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.dof, 2u);
  const std::size_t two_pop[] = {1, 1}, two[] = {10, 10};
  EXPECT_EQ(chi2_homogeneity(two, two_pop).statistic, 0.0);
}

TEST(ChiSquare, PoolsSparseClasses) {
  // Expected counts 90, 6, 2, 2 -> the last two pool into one bucket.
  const std::size_t pop[] = {900, 60, 20, 20}, sample[] = {88, 7, 3, 2};
  const auto r = chi2_homogeneity(sample, pop);
  EXPECT_EQ(r.buckets, 3u);
  EXPECT_NEAR(r.statistic, 4.0 / 90 + 1.0 / 6 + 1.0 / 4, 1e-12);
}

TEST(ChiSquare, Errors) {
  const std::size_t a[] = {1, 2}, b[] = {1, 2, 3}, z[] = {0, 0};
  EXPECT_THROW(chi2_homogeneity(a, b), InvalidInput);
  EXPECT_THROW(chi2_homogeneity(z, a), InvalidInput);
  EXPECT_THROW(chi2_homogeneity(std::span<const std::size_t>(), std::span<const std::size_t>()),
               InvalidInput);
}

TEST(ChiSquare, AgreesWithMonteCarlo) {
  const std::vector<std::size_t> pop{500, 300, 200};
  const std::vector<double> p{0.5, 0.3, 0.2};
  for (const std::vector<std::size_t>& obs :
       {std::vector<std::size_t>{310, 170, 120}, {280, 195, 125}, {330, 160, 110}}) {
    const double analytic = chi2_homogeneity(obs, pop).p_value;
    const double mc = testing::monte_carlo_chi2_p(obs, p, 100000, 99);
    EXPECT_NEAR(analytic, mc, 0.02) << obs[0] << "," << obs[1] << "," << obs[2];
  }
}

}  // namespace
}  // namespace marine
