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

#include "marine/classify.hpp"

namespace marine::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// Central differences against loss_and_gradients with dropout off. The
/// per-entry error is |a - n| / max(|a| + |n|, floor).
inline GradCheck gradient_check(const ClassifierHead& head, const Matrix& x, const Matrix& y,
                                const Vector& w, double h = 1e-5, double floor = 1e-5) {
  const auto analytic = loss_and_gradients(head, x, y, w).grads;
  ClassifierHead probe = head;
  GradCheck out;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + h;
    const double up = loss_and_gradients(probe, x, y, w).loss;
    param = saved - h;
    const double down = loss_and_gradients(probe, x, y, w).loss;
    param = saved;
    const double n = (up - down) / (2.0 * h);
    out.max_rel_error = std::max(out.max_rel_error, std::abs(a - n) / std::max(std::abs(a) + std::abs(n), floor));
    ++out.parameters;
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto& layer = probe.layers[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      check(layer.weights.data()[i], analytic.layers[l].weights.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      check(layer.bias.data()[i], analytic.layers[l].bias.data()[i]);
  }
  return out;
}

/// A random small head with random batch, targets and weights.
struct GradProblem {
  ClassifierHead head;
  Matrix x, y;
  Vector w;
};

inline GradProblem random_grad_problem(std::uint64_t seed, int hidden_layers) {
  Rng rng(seed);
  HeadConfig c;
  c.input_dim = 3 + rng.below(10);
  c.hidden_layers = hidden_layers;
  c.hidden_width = 4 + static_cast<int>(rng.below(12));
  c.bottleneck_width = 2 + static_cast<int>(rng.below(8));
  c.n_outputs = 1 + static_cast<int>(rng.below(4));
  c.dropout_rate = 0.0;
  c.seed = seed;
  GradProblem p{init_head(c), {}, {}, {}};
  // Non-zero biases so the check also exercises them away from init.
  for (auto& l : p.head.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.uniform(-0.3, 0.3);
  const Eigen::Index batch = 2 + static_cast<Eigen::Index>(rng.below(7));
  p.x = Matrix(batch, static_cast<Eigen::Index>(c.input_dim));
  for (Eigen::Index i = 0; i < p.x.size(); ++i) p.x.data()[i] = rng.normal();
  p.y = Matrix(batch, c.n_outputs);
  for (Eigen::Index i = 0; i < p.y.size(); ++i) p.y.data()[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
  p.w = Vector(batch);
  for (Eigen::Index i = 0; i < batch; ++i) p.w[i] = rng.uniform(0.2, 3.0);
  return p;
}

}  // namespace marine::testing
