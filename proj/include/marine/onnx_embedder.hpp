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

// ONNX backbone backend, run through OpenCV's DNN module.
//
// The model ships with a sidecar JSON (same stem, ".json" extension):
//
//   {"identity": "vit-s14", "dim": 384,
//    "mean": [r, g, b], "std": [r, g, b],   // applied after scaling to [0, 1]
//    "short_side": 448, "patch_size": 14,
//    "output": "cls"}                      // optional output name
//
// The graph takes NCHW float RGB and returns either [1, d] or [1, T, d]; in
// the latter case token 0 (the classifier token) is used.

#include <array>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "marine/embed.hpp"

namespace marine {

struct OnnxBackendMetadata {
  std::string identity;
  std::size_t dim = 0;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
  int short_side = 448;
  int patch_size = 14;
  std::string output;

  static OnnxBackendMetadata load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing backend metadata " + path.string());
    OnnxBackendMetadata m;
    try {
      const auto j = nlohmann::json::parse(in);
      m.identity = j.at("identity").get<std::string>();
      m.dim = j.at("dim").get<std::size_t>();
      m.mean = j.at("mean").get<std::array<double, 3>>();
      m.std = j.at("std").get<std::array<double, 3>>();
      m.short_side = j.value("short_side", 448);
      m.patch_size = j.value("patch_size", 14);
      m.output = j.value("output", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (m.dim == 0) throw ConfigError(path.string() + ": dim must be positive");
    for (double s : m.std)
      if (!(s > 0.0)) throw ConfigError(path.string() + ": std must be positive");
    return m;
  }
};

class OnnxEmbedder final : public Embedder {
 public:
  explicit OnnxEmbedder(const std::filesystem::path& model)
      : OnnxEmbedder(model, std::filesystem::path(model).replace_extension(".json")) {}

  OnnxEmbedder(const std::filesystem::path& model,
               const std::filesystem::path& metadata)
      : meta_(OnnxBackendMetadata::load(metadata)) {
    if (!std::filesystem::exists(model))
      throw ConfigError("model file not found: " + model.string());
    try {
      net_ = cv::dnn::readNetFromONNX(model.string());
    } catch (const cv::Exception& e) {
      throw EmbedderError("cannot load " + model.string() + ": " + e.what());
    }
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    // Fail early on impossible preprocessing settings.
    patch_geometry(meta_.short_side, meta_.short_side, meta_.short_side,
                   meta_.patch_size);
  }

  std::string_view backend() const override { return "onnx_model"; }
  std::size_t dim() const override { return meta_.dim; }
  const std::string& identity() const override { return meta_.identity; }
  const OnnxBackendMetadata& metadata() const { return meta_; }

  std::vector<float> embed_frame(const FrameRef& ref) const override {
    if (ref.frame == nullptr || ref.frame->empty())
      throw EmbedderError("onnx backend needs pixels");
    if (ref.frame->channels != 3)
      throw InvalidInput("onnx backend expects RGB frames");
    const Frame resized =
        resize_for_patch(*ref.frame, meta_.short_side, meta_.patch_size);
    const cv::Mat blob = to_blob(resized);

    cv::Mat out;
    {
      // cv::dnn::Net keeps per-forward state.
      std::lock_guard<std::mutex> lock(mutex_);
      try {
        net_.setInput(blob);
        out = meta_.output.empty() ? net_.forward() : net_.forward(meta_.output);
      } catch (const cv::Exception& e) {
        throw EmbedderError(std::string("inference failed: ") + e.what());
      }
    }
    return cls_token(out);
  }

 private:
  cv::Mat to_blob(const Frame& f) const {
    const int sizes[4] = {1, 3, f.height, f.width};
    cv::Mat blob(4, sizes, CV_32F);
    auto* data = blob.ptr<float>();
    const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
    for (int c = 0; c < 3; ++c) {
      const double mean = meta_.mean[c];
      const double inv_std = 1.0 / meta_.std[c];
      for (std::size_t i = 0; i < plane; ++i)
        data[c * plane + i] = static_cast<float>(
            (f.pixels[i * 3 + c] / 255.0 - mean) * inv_std);
    }
    return blob;
  }

  std::vector<float> cls_token(const cv::Mat& out) const {
    if (out.depth() != CV_32F) throw EmbedderError("model output is not float32");
    const std::size_t total = out.total();
    if (total < meta_.dim || total % meta_.dim != 0)
      throw EmbedderError("model output has " + std::to_string(total) +
                          " values, not a multiple of dim " +
                          std::to_string(meta_.dim));
    const float* p = out.ptr<float>();
    std::vector<float> v(p, p + meta_.dim);
    for (float x : v)
      if (!std::isfinite(x)) throw NumericError("non-finite model output");
    return v;
  }

  OnnxBackendMetadata meta_;
  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
};

}  // namespace marine
