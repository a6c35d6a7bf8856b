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

// Shallow classification head on concatenated frame features.
//
// Architecture:
//
//   input (k*d) -> dense 10, ReLU -> [dense 128, ReLU] x hidden_layers
//               -> dense n_outputs, sigmoid
//
// Inverted dropout follows every ReLU in training mode. Training minimises
// the weighted binary cross-entropy with Adam on seeded mini-batches; all
// arithmetic is double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marine/error.hpp"
#include "marine/random.hpp"

namespace marine {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct HeadConfig {
  std::size_t input_dim = 0;
  int hidden_layers = 0;  // 0..3
  int hidden_width = 128;
  int bottleneck_width = 10;
  int n_outputs = 1;
  double dropout_rate = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim == 0) throw ConfigError("head input_dim must be positive");
    if (hidden_layers < 0 || hidden_layers > 3)
      throw ConfigError("hidden_layers must be in [0, 3], got " +
                        std::to_string(hidden_layers));
    if (hidden_width <= 0 || bottleneck_width <= 0 || n_outputs <= 0)
      throw ConfigError("layer widths must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  Eigen::Index in() const { return weights.cols(); }
  Eigen::Index out() const { return weights.rows(); }

  static DenseLayer zeros(Eigen::Index in, Eigen::Index out) {
    return {Matrix::Zero(out, in), Vector::Zero(out)};
  }
};

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  std::uint64_t step = 0;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  std::string data_fingerprint;
};

struct ClassifierHead {
  HeadConfig config;
  std::vector<DenseLayer> layers;
  AdamState adam;
  double threshold = 0.5;
  TrainingMetadata metadata;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
};

/// Layer widths from input to output, e.g. {40, 10, 128, 128, 1}.
inline std::vector<Eigen::Index> layer_widths(const HeadConfig& c) {
  std::vector<Eigen::Index> w{static_cast<Eigen::Index>(c.input_dim),
                              c.bottleneck_width};
  for (int i = 0; i < c.hidden_layers; ++i) w.push_back(c.hidden_width);
  w.push_back(c.n_outputs);
  return w;
}

/// He-uniform weights for the ReLU layers, Glorot-uniform for the sigmoid
/// output, zero biases; seeded from config.seed.
inline ClassifierHead init_head(const HeadConfig& config) {
  config.validate();
  ClassifierHead head;
  head.config = config;
  const auto widths = layer_widths(config);
  Rng rng(derive_seed(config.seed, {0x1417}));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index in = widths[l], out = widths[l + 1];
    const bool is_output = l + 2 == widths.size();
    const double limit = is_output ? std::sqrt(6.0 / static_cast<double>(in + out))
                                   : std::sqrt(6.0 / static_cast<double>(in));
    DenseLayer layer = DenseLayer::zeros(in, out);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    head.layers.push_back(std::move(layer));
    head.adam.m.push_back(DenseLayer::zeros(in, out));
    head.adam.v.push_back(DenseLayer::zeros(in, out));
  }
  head.metadata.seed = config.seed;
  return head;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// -[y log s(z) + (1-y) log(1 - s(z))], computed from the logit.
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

struct ForwardTrace {
  std::vector<Matrix> pre;    // pre-activation per layer
  std::vector<Matrix> act;    // act[0] = input, act[l+1] = output of layer l
  std::vector<Matrix> masks;  // dropout scale per hidden layer (empty if off)
};

inline ForwardTrace forward_trace(const ClassifierHead& head, const Matrix& x,
                                  Rng* dropout_rng) {
  ForwardTrace t;
  t.act.push_back(x);
  const double p = head.config.dropout_rate;
  const bool drop = dropout_rng != nullptr && p > 0.0;
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    const DenseLayer& layer = head.layers[l];
    Matrix z = t.act.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    t.pre.push_back(z);
    const bool is_output = l + 1 == head.layers.size();
    if (is_output) {
      t.act.push_back(z.unaryExpr([](double v) { return sigmoid(v); }));
      break;
    }
    Matrix a = z.cwiseMax(0.0);
    if (drop) {
      Matrix mask(a.rows(), a.cols());
      const double keep_scale = 1.0 / (1.0 - p);
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = dropout_rng->bernoulli(p) ? 0.0 : keep_scale;
      a = a.cwiseProduct(mask);
      t.masks.push_back(std::move(mask));
    }
    t.act.push_back(std::move(a));
  }
  return t;
}

inline void check_input(const ClassifierHead& head, Eigen::Index cols) {
  if (cols != static_cast<Eigen::Index>(head.config.input_dim))
    throw InvalidInput("feature length " + std::to_string(cols) +
                       " does not match head input_dim " +
                       std::to_string(head.config.input_dim));
}

}  // namespace detail

/// Sigmoid outputs for one feature vector. Dropout is active only when
/// train_mode is set (and then `rng` must be non-null).
inline Vector forward(const ClassifierHead& head, std::span<const double> x,
                      bool train_mode = false, Rng* rng = nullptr) {
  detail::check_input(head, static_cast<Eigen::Index>(x.size()));
  if (train_mode && rng == nullptr && head.config.dropout_rate > 0.0)
    throw InvalidInput("train-mode forward with dropout needs an rng");
  Matrix row = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  const auto trace = detail::forward_trace(head, row, train_mode ? rng : nullptr);
  return trace.act.back().row(0).transpose();
}

/// Eval-mode outputs for a batch, one row per sample.
inline Matrix predict(const ClassifierHead& head, const Matrix& x) {
  detail::check_input(head, x.cols());
  return detail::forward_trace(head, x, nullptr).act.back();
}

struct Gradients {
  std::vector<DenseLayer> layers;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Weighted BCE averaged over output nodes, then sample-weighted and divided
/// by the batch size: L = (1/B) sum_i s_i * (1/C) sum_c bce(p_ic, y_ic).
inline LossAndGradients loss_and_gradients(const ClassifierHead& head,
                                           const Matrix& x, const Matrix& y,
                                           const Vector& sample_weights,
                                           Rng* dropout_rng = nullptr) {
  detail::check_input(head, x.cols());
  const Eigen::Index batch = x.rows();
  const Eigen::Index outputs = head.config.n_outputs;
  if (batch == 0) throw InvalidInput("empty batch");
  if (y.rows() != batch || y.cols() != outputs || sample_weights.size() != batch)
    throw InvalidInput("label/weight shape does not match the batch");

  const auto trace = detail::forward_trace(head, x, dropout_rng);
  const Matrix& logits = trace.pre.back();
  const double norm = 1.0 / (static_cast<double>(batch) * static_cast<double>(outputs));

  LossAndGradients out;
  Matrix delta(batch, outputs);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index c = 0; c < outputs; ++c) {
      const double yc = y(i, c);
      loss += sample_weights[i] * detail::bce_with_logit(logits(i, c), yc);
      delta(i, c) = sample_weights[i] * norm * (trace.act.back()(i, c) - yc);
    }
  out.loss = loss * norm;
  if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");

  out.grads.layers.resize(head.layers.size());
  std::size_t mask_idx = trace.masks.size();
  for (std::size_t l = head.layers.size(); l-- > 0;) {
    auto& g = out.grads.layers[l];
    g.weights = delta.transpose() * trace.act[l];
    g.bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix back = delta * head.layers[l].weights;
    if (!trace.masks.empty()) back = back.cwiseProduct(trace.masks[--mask_idx]);
    const Matrix& z = trace.pre[l - 1];
    delta = back.cwiseProduct(
        z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  }
  return out;
}

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_step(ClassifierHead& head, const Gradients& g,
                      const AdamParams& p = {}) {
  auto& st = head.adam;
  ++st.step;
  const double lr = head.config.learning_rate;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(st.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = p.beta1 * m + (1.0 - p.beta1) * grad;
    v = p.beta2 * v + (1.0 - p.beta2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + p.epsilon);
  };
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    update(head.layers[l].weights, st.m[l].weights, st.v[l].weights, g.layers[l].weights);
    update(head.layers[l].bias, st.m[l].bias, st.v[l].bias, g.layers[l].bias);
  }
}

/// Features, per-output 0/1 targets and per-sample loss weights.
struct TrainingData {
  Matrix x;
  Matrix y;
  Vector weights;

  Eigen::Index size() const { return x.rows(); }

  std::string fingerprint() const {
    Fnv1a h;
    h.update(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
    h.update(y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
    h.update(weights.data(), sizeof(double) * static_cast<std::size_t>(weights.size()));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.value()));
    return buf;
  }

  TrainingData subset(std::span<const std::size_t> rows) const {
    TrainingData out{Matrix(rows.size(), x.cols()), Matrix(rows.size(), y.cols()),
                     Vector(rows.size())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(rows[i]);
      out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
      out.y.row(static_cast<Eigen::Index>(i)) = y.row(r);
      out.weights[static_cast<Eigen::Index>(i)] = weights[r];
    }
    return out;
  }
};

/// Continues training `head` for `epochs` passes over `data`.
inline void train_epochs(ClassifierHead& head, const TrainingData& data, int epochs) {
  const auto n = static_cast<std::size_t>(data.size());
  if (n == 0) throw InvalidInput("cannot train on an empty dataset");
  if (data.x.cols() != static_cast<Eigen::Index>(head.config.input_dim) ||
      data.y.cols() != head.config.n_outputs || data.weights.size() != data.x.rows() ||
      data.y.rows() != data.x.rows())
    throw InvalidInput("training data shape does not match the head");

  Rng shuffle_rng(derive_seed(head.config.seed, {0x5a5a, head.adam.step}));
  Rng dropout_rng(derive_seed(head.config.seed, {0xd20f, head.adam.step}));
  std::vector<std::size_t> order(n);
  const std::size_t bs = head.config.batch_size;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      const TrainingData batch =
          data.subset(std::span<const std::size_t>(order).subspan(start, len));
      const auto lg = loss_and_gradients(head, batch.x, batch.y, batch.weights,
                                         &dropout_rng);
      adam_step(head, lg.grads);
    }
  }
  for (const auto& l : head.layers)
    if (!l.weights.allFinite() || !l.bias.allFinite())
      throw NumericError("training produced non-finite parameters");
  head.metadata.epochs += epochs;
}

/// Fresh head trained for `epochs` (config.epochs when omitted). Threshold is
/// left at 0.5; use the select_threshold_* helpers afterwards.
inline ClassifierHead train(const HeadConfig& config, const TrainingData& data,
                            std::optional<int> epochs = std::nullopt) {
  ClassifierHead head = init_head(config);
  head.metadata.data_fingerprint = data.fingerprint();
  const int n_epochs = epochs.value_or(config.epochs);
  if (n_epochs > 0) train_epochs(head, data, n_epochs);
  head.threshold = 0.5;
  return head;
}

// ---------------------------------------------------------------------------
// Class and sample weights

/// w_k = n / (K * f_k + epsilon). With epsilon == 0 a zero count is an error.
inline std::vector<double> class_weights(std::span<const std::size_t> counts,
                                         std::size_t n, double epsilon = 0.0) {
  if (counts.empty()) throw InvalidInput("class_weights needs at least one class");
  const double k = static_cast<double>(counts.size());
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double denom = k * static_cast<double>(counts[i]) + epsilon;
    if (!(denom > 0.0))
      throw NumericError("class " + std::to_string(i) +
                         " has no samples; class weight undefined");
    w.push_back(static_cast<double>(n) / denom);
  }
  return w;
}

inline constexpr double kMultilabelSmoothing = 1e-6;

/// s_i = max over the sample's classes of w_k; samples without labels get 1.
inline std::vector<double> sample_weights(
    const std::vector<std::vector<std::size_t>>& labels_per_sample,
    std::span<const double> class_w) {
  std::vector<double> s;
  s.reserve(labels_per_sample.size());
  for (const auto& set : labels_per_sample) {
    if (set.empty()) {
      s.push_back(1.0);
      continue;
    }
    double m = 0.0;
    for (std::size_t k : set) {
      if (k >= class_w.size()) throw InvalidInput("label index out of range");
      m = std::max(m, class_w[k]);
    }
    s.push_back(m);
  }
  return s;
}

/// Binary targets -> per-sample weight w_{y_i} using class weights computed on
/// the same targets.
inline Vector binary_sample_weights(const Matrix& y) {
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) pos += y(i, 0) > 0.5;
  const std::size_t counts[2] = {static_cast<std::size_t>(y.rows()) - pos, pos};
  const auto w = class_weights(counts, static_cast<std::size_t>(y.rows()));
  Vector s(y.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i) s[i] = w[y(i, 0) > 0.5 ? 1 : 0];
  return s;
}

/// Smoothed class weights, then s_i = max_k over each sample's positives.
inline Vector multilabel_sample_weights(const Matrix& y) {
  const auto n = static_cast<std::size_t>(y.rows());
  std::vector<std::size_t> counts(static_cast<std::size_t>(y.cols()), 0);
  std::vector<std::vector<std::size_t>> sets(n);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      if (y(i, c) > 0.5) {
        ++counts[static_cast<std::size_t>(c)];
        sets[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(c));
      }
  const auto w = class_weights(counts, n, kMultilabelSmoothing);
  const auto s = sample_weights(sets, w);
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

// ---------------------------------------------------------------------------
// Decision thresholds

struct ThresholdChoice {
  double threshold = 0.5;
  double f1 = 0.0;
};

namespace detail {
inline double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}
}  // namespace detail

/// Tries every unique score t as "score >= t is positive" and keeps the
/// smallest t with maximal F1.
inline ThresholdChoice select_threshold_binary(std::span<const double> scores,
                                               std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw InvalidInput("scores and labels differ in length");
  const std::size_t positives =
      static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                             [](int l) { return l != 0; }));
  if (positives == 0)
    throw DataError("threshold selection needs at least one positive label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep descending: after consuming every sample with score >= t the
  // counts describe threshold t.
  ThresholdChoice best{1.0, -1.0};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i)
      (labels[order[i]] ? tp : fp) += 1;
    const double f1 = detail::f1_from_counts(tp, fp, positives - tp);
    if (f1 >= best.f1) best = {t, f1};  // later t is smaller
  }
  return best;
}

/// One global threshold from {0.1, ..., 0.9} maximising micro-F1 over all
/// (sample, class) pairs; ties to the smaller threshold.
inline ThresholdChoice select_threshold_multilabel(const Matrix& scores,
                                                   const Matrix& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols())
    throw InvalidInput("score and label matrices differ in shape");
  if ((labels.array() > 0.5).count() == 0)
    throw DataError("threshold selection needs at least one positive label");
  ThresholdChoice best{0.1, -1.0};
  for (int step = 1; step <= 9; ++step) {
    const double t = step / 10.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      const bool pred = scores.data()[i] >= t;
      const bool truth = labels.data()[i] > 0.5;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const double f1 = detail::f1_from_counts(tp, fp, fn);
    if (f1 > best.f1) best = {t, f1};
  }
  return best;
}

}  // namespace marine
