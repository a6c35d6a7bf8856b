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

#include <cmath>
#include <vector>

#include "marine/evaluate.hpp"

namespace marine::testing {

/// AP from the explicit precision at each positive's rank. Rank order is
/// score descending, then sample index.
inline double brute_force_ap(const std::vector<double>& s, const std::vector<int>& l) {
  const std::size_t n = s.size();
  auto before = [&](std::size_t j, std::size_t i) { return s[j] > s[i] || (s[j] == s[i] && j < i); };
  double sum = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!l[i]) continue;
    ++positives;
    std::size_t rank = 1, hits = 1;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && before(j, i)) {
        ++rank;
        hits += l[j] != 0;
      }
    sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return sum / positives;
}

struct MapOracleResult {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  double max_abs_diff = 0.0;
};

/// Every label pattern of every shape up to 8 x 3 (columns filled per class
/// from the full 2^n enumeration), each with several score layouts including
/// heavy ties. mAP is compared with the mean of brute_force_ap over classes
/// that have a positive.
inline MapOracleResult exhaustive_map_oracle(std::uint64_t seed, double tol = 1e-12) {
  MapOracleResult r;
  Rng rng(seed);
  for (int n = 1; n <= 8; ++n)
    for (int c = 1; c <= 3; ++c)
      for (std::uint32_t pattern = 0; pattern < (1u << n); ++pattern)
        for (int layout = 0; layout < 3; ++layout) {
          Matrix scores(n, c), labels(n, c);
          for (int k = 0; k < c; ++k) {
            // Column k rotates the base pattern so the classes differ.
            const std::uint32_t p = ((pattern << k) | (pattern >> (n - k % n))) & ((1u << n) - 1);
            for (int i = 0; i < n; ++i) {
              labels(i, k) = (p >> i) & 1;
              scores(i, k) = layout == 0   ? rng.uniform()
                             : layout == 1 ? static_cast<double>(rng.below(3))
                                           : 0.5;
            }
          }
          double want = 0.0;
          int included = 0;
          for (int k = 0; k < c; ++k) {
            std::vector<double> s(n);
            std::vector<int> l(n);
            int pos = 0;
            for (int i = 0; i < n; ++i) {
              s[i] = scores(i, k);
              l[i] = labels(i, k) > 0.5;
              pos += l[i];
            }
            if (pos == 0) continue;
            want += brute_force_ap(s, l);
            ++included;
          }
          ++r.cases;
          if (included == 0) {
            try {
              multilabel_map(scores, labels);
              ++r.mismatches;
            } catch (const MetricError&) {
            }
            continue;
          }
          want /= included;
          const double got = multilabel_map(scores, labels).map;
          const double d = std::abs(got - want);
          r.max_abs_diff = std::max(r.max_abs_diff, d);
          if (!(d <= tol)) ++r.mismatches;
        }
  return r;
}

/// P(U > V) + P(U == V) / 2 over all positive/negative pairs.
inline double mann_whitney_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] && !l[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

/// Pearson statistic of `counts` against proportions `p` (no pooling).
inline double pearson(const std::vector<std::size_t>& counts, const std::vector<double>& p) {
  double n = 0.0;
  for (auto c : counts) n += static_cast<double>(c);
  double x = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = n * p[k];
    x += (static_cast<double>(counts[k]) - e) * (static_cast<double>(counts[k]) - e) / e;
  }
  return x;
}

/// Fraction of multinomial(n, p) draws whose Pearson statistic reaches the
/// observed one.
inline double monte_carlo_chi2_p(const std::vector<std::size_t>& observed,
                                 const std::vector<double>& p, std::size_t draws,
                                 std::uint64_t seed) {
  std::size_t n = 0;
  for (auto c : observed) n += c;
  const double stat = pearson(observed, p);
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) cdf[k] = acc += p[k];
  Rng rng(seed);
  std::size_t hits = 0;
  std::vector<std::size_t> counts(p.size());
  for (std::size_t d = 0; d < draws; ++d) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform() * acc;
      std::size_t k = 0;
      while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
      ++counts[k];
    }
    hits += pearson(counts, p) >= stat - 1e-9;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

}  // namespace marine::testing
