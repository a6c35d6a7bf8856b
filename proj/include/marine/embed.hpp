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
#include <filesystem>
#include <map>
#include <memory>
#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "marine/error.hpp"
#include "marine/frameselect.hpp"
#include "marine/marf.hpp"
#include "marine/media.hpp"

namespace marine {

/// One frame handed to an embedder. Backends that look vectors up by id
/// (feature_store) may receive a null `frame`.
struct FrameRef {
  std::string_view video_id;
  std::size_t index = 0;
  const Frame* frame = nullptr;
};

/// Frozen per-frame feature extractor. Implementations are immutable after
/// construction and safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::string_view backend() const = 0;
  virtual std::size_t dim() const = 0;
  virtual const std::string& identity() const = 0;
  virtual bool needs_pixels() const { return true; }

  virtual std::vector<float> embed_frame(const FrameRef& ref) const = 0;
};

/// Per-frame [mean, std, mean |d/dx|, mean |d/dy|] of greyscale intensities.
/// Needs no model and still carries a learnable signal for blur and texture.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::string identity = "mock-v1")
      : identity_(std::move(identity)) {}

  std::string_view backend() const override { return "mock"; }
  std::size_t dim() const override { return 4; }
  const std::string& identity() const override { return identity_; }

  std::vector<float> embed_frame(const FrameRef& ref) const override {
    if (ref.frame == nullptr || ref.frame->empty())
      throw EmbedderError("mock backend needs pixels for frame " +
                          std::to_string(ref.index));
    return statistics(to_greyscale(*ref.frame));
  }

  static std::vector<float> statistics(const GreyFrame& g) {
    const std::size_t n = g.pixels.size();
    double sum = 0.0, sq = 0.0;
    for (std::uint8_t p : g.pixels) {
      sum += p;
      sq += static_cast<double>(p) * p;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);

    double gx = 0.0, gy = 0.0;
    std::size_t nx = 0, ny = 0;
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x + 1 < g.width; ++x, ++nx)
        gx += std::abs(static_cast<int>(g.at(y, x + 1)) - g.at(y, x));
    for (int y = 0; y + 1 < g.height; ++y)
      for (int x = 0; x < g.width; ++x, ++ny)
        gy += std::abs(static_cast<int>(g.at(y + 1, x)) - g.at(y, x));
    return {static_cast<float>(mean), static_cast<float>(std::sqrt(var)),
            static_cast<float>(nx ? gx / static_cast<double>(nx) : 0.0),
            static_cast<float>(ny ? gy / static_cast<double>(ny) : 0.0)};
  }

 private:
  std::string identity_;
};

/// Serves precomputed per-frame vectors from MARF files, one per video.
class FeatureStoreEmbedder final : public Embedder {
 public:
  /// Loads every *.marf under `dir`; all files must agree on d and tag.
  explicit FeatureStoreEmbedder(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("feature store directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".marf")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(read_feature(f));
    if (store_.empty())
      throw ConfigError("feature store " + dir.string() + " holds no .marf files");
  }

  explicit FeatureStoreEmbedder(std::vector<VideoFeature> features) {
    for (auto& f : features) add(std::move(f));
    if (store_.empty()) throw ConfigError("empty feature store");
  }

  std::string_view backend() const override { return "feature_store"; }
  std::size_t dim() const override { return dim_; }
  const std::string& identity() const override { return identity_; }
  bool needs_pixels() const override { return false; }

  std::vector<float> embed_frame(const FrameRef& ref) const override {
    const auto it = store_.find(std::string(ref.video_id));
    if (it == store_.end())
      throw EmbedderError("feature store has no video '" +
                          std::string(ref.video_id) + "'");
    const VideoFeature& f = it->second;
    for (std::size_t j = 0; j < f.k; ++j)
      if (f.frame_indices[j] == ref.index) {
        auto block = f.frame_block(j);
        return {block.begin(), block.end()};
      }
    throw EmbedderError("feature store video '" + std::string(ref.video_id) +
                        "' has no frame " + std::to_string(ref.index));
  }

 private:
  void add(VideoFeature f) {
    if (store_.empty()) {
      dim_ = f.d;
      identity_ = f.backbone;
    } else if (f.d != dim_ || f.backbone != identity_) {
      throw ConfigError("feature store mixes backbones: '" + identity_ + "' d=" +
                        std::to_string(dim_) + " vs '" + f.backbone +
                        "' d=" + std::to_string(f.d));
    }
    std::string id = f.video_id;
    store_.emplace(std::move(id), std::move(f));
  }

  std::unordered_map<std::string, VideoFeature> store_;
  std::size_t dim_ = 0;
  std::string identity_;
};

/// Embeds the selected frames in selection order and concatenates the
/// vectors frame-major. Repeated indices are embedded once.
inline VideoFeature build_video_feature(const Embedder& e,
                                        std::string_view video_id,
                                        std::span<const Frame> frames,
                                        const FrameSelection& sel) {
  const std::size_t d = e.dim();
  if (d == 0) throw EmbedderError("embedder reports dimension 0");
  VideoFeature out;
  out.video_id = std::string(video_id);
  out.k = static_cast<std::uint32_t>(sel.indices.size());
  out.d = static_cast<std::uint32_t>(d);
  out.backbone = e.identity();
  out.values.reserve(sel.indices.size() * d);

  std::map<std::size_t, std::vector<float>> cache;
  for (std::size_t idx : sel.indices) {
    if (e.needs_pixels() && idx >= frames.size())
      throw InvalidInput("selected frame " + std::to_string(idx) + " outside " +
                         std::string(video_id) + " (" +
                         std::to_string(frames.size()) + " frames)");
    auto it = cache.find(idx);
    if (it == cache.end()) {
      std::vector<float> v;
      try {
        v = e.embed_frame({video_id, idx,
                           idx < frames.size() ? &frames[idx] : nullptr});
      } catch (const NumericError& err) {
        throw NumericError(std::string(video_id) + " frame " +
                           std::to_string(idx) + ": " + err.what());
      } catch (const Error& err) {
        throw EmbedderError(std::string(video_id) + " frame " +
                            std::to_string(idx) + ": " + err.what());
      }
      if (v.size() != d)
        throw EmbedderError("backend returned " + std::to_string(v.size()) +
                            " values, expected " + std::to_string(d));
      for (float x : v)
        if (!std::isfinite(x))
          throw NumericError(std::string(video_id) + " frame " +
                             std::to_string(idx) + ": non-finite embedding");
      it = cache.emplace(idx, std::move(v)).first;
    }
    out.values.insert(out.values.end(), it->second.begin(), it->second.end());
    out.frame_indices.push_back(static_cast<std::uint32_t>(idx));
  }
  return out;
}

inline VideoFeature build_video_feature(const Embedder& e,
                                        const FrameSequence& seq,
                                        const FrameSelection& sel) {
  return build_video_feature(e, seq.video_id, seq.frames, sel);
}

}  // namespace marine
