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

// Classifier head <-> JSON. Parameters are base64 little-endian f64 blobs,
// weights row-major (out x in).

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "marine/base64.hpp"
#include "marine/classify.hpp"

namespace marine {

inline nlohmann::json to_json(const HeadConfig& c) {
  return {{"input_dim", c.input_dim},         {"hidden_layers", c.hidden_layers},
          {"hidden_width", c.hidden_width},   {"bottleneck_width", c.bottleneck_width},
          {"n_outputs", c.n_outputs},         {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed}};
}

inline HeadConfig head_config_from_json(const nlohmann::json& j) {
  HeadConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.hidden_width = j.value("hidden_width", 128);
  c.bottleneck_width = j.value("bottleneck_width", 10);
  c.n_outputs = j.value("n_outputs", 1);
  c.dropout_rate = j.value("dropout_rate", 0.0);
  c.learning_rate = j.value("learning_rate", 1e-3);
  c.batch_size = j.value("batch_size", std::size_t{32});
  c.epochs = j.value("epochs", 10);
  c.seed = j.value("seed", std::uint64_t{0});
  return c;
}

namespace detail {

inline std::string encode_matrix(const Matrix& m) {
  return base64::encode_f64(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

inline Matrix decode_matrix(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  const auto v = base64::decode_f64(text);
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw DataError("parameter blob has " + std::to_string(v.size()) +
                    " values, expected " + std::to_string(rows * cols));
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace detail

inline nlohmann::json to_json(const ClassifierHead& head) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : head.layers)
    layers.push_back({{"in", l.in()},
                      {"out", l.out()},
                      {"weights", detail::encode_matrix(l.weights)},
                      {"bias", detail::encode_matrix(Matrix(l.bias.transpose()))}});
  return {{"format", "marine-head"},
          {"version", 1},
          {"config", to_json(head.config)},
          {"layers", layers},
          {"threshold", head.threshold},
          {"metadata",
           {{"seed", head.metadata.seed},
            {"epochs", head.metadata.epochs},
            {"data_fingerprint", head.metadata.data_fingerprint}}}};
}

/// Adam moments are not persisted; a loaded head is for inference.
inline ClassifierHead head_from_json(const nlohmann::json& j) {
  ClassifierHead head;
  try {
    if (j.value("format", std::string()) != "marine-head")
      throw DataError("not a classifier head file");
    head.config = head_config_from_json(j.at("config"));
    head.config.validate();
    const auto widths = layer_widths(head.config);
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != widths.size())
      throw DataError("layer count does not match the head config");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& jl = layers[l];
      const Eigen::Index in = widths[l], out = widths[l + 1];
      if (jl.at("in").get<Eigen::Index>() != in || jl.at("out").get<Eigen::Index>() != out)
        throw DataError("layer " + std::to_string(l) + " shape mismatch");
      DenseLayer dl;
      dl.weights = detail::decode_matrix(jl.at("weights").get<std::string>(), out, in);
      dl.bias = detail::decode_matrix(jl.at("bias").get<std::string>(), 1, out).transpose();
      if (!dl.weights.allFinite() || !dl.bias.allFinite())
        throw DataError("non-finite parameter in layer " + std::to_string(l));
      head.layers.push_back(std::move(dl));
      head.adam.m.push_back(DenseLayer::zeros(in, out));
      head.adam.v.push_back(DenseLayer::zeros(in, out));
    }
    head.threshold = j.at("threshold").get<double>();
    if (!(head.threshold > 0.0 && head.threshold < 1.0))
      throw DataError("threshold must lie in (0, 1)");
    const auto& m = j.at("metadata");
    head.metadata = {m.value("seed", std::uint64_t{0}), m.value("epochs", 0),
                     m.value("data_fingerprint", std::string())};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed head JSON: ") + e.what());
  }
  return head;
}

inline void save_head(const std::filesystem::path& path, const ClassifierHead& head) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(head).dump(2) << "\n";
}

inline ClassifierHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open head file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return head_from_json(j);
}

}  // namespace marine
