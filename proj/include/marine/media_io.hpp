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

// Video and image-directory ingestion. Requires OpenCV (core, imgcodecs,
// videoio); link against marine::io.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "marine/media.hpp"

namespace marine {

struct DecodeConfig {
  std::size_t stride = 1;  // keep every stride-th frame
  std::size_t limit = 0;   // 0 = no limit
  std::optional<double> fps;  // required for image directories without meta.json
};

namespace detail {

inline Frame frame_from_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  if (bgr.channels() == 1) {
    rgb = bgr;
  } else if (bgr.channels() == 3) {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  } else if (bgr.channels() == 4) {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
  } else {
    throw DecodeError("unsupported channel count " +
                      std::to_string(bgr.channels()));
  }
  if (rgb.depth() != CV_8U) rgb.convertTo(rgb, CV_8U);
  Frame f(rgb.rows, rgb.cols, rgb.channels());
  for (int y = 0; y < rgb.rows; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y),
                static_cast<std::size_t>(rgb.cols) * rgb.channels(),
                f.pixels.begin() +
                    static_cast<std::ptrdiff_t>(y) * rgb.cols * rgb.channels());
  return f;
}

inline cv::Mat mat_from_frame(const Frame& f) {
  const int type = f.channels == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat rgb(f.height, f.width, type,
              const_cast<std::uint8_t*>(f.pixels.data()));
  if (f.channels == 1) return rgb.clone();
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline bool keep(std::size_t raw_index, const DecodeConfig& cfg) {
  return cfg.stride <= 1 || raw_index % cfg.stride == 0;
}

inline FrameSequence decode_directory(const std::filesystem::path& dir,
                                      const DecodeConfig& cfg) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path()))
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::optional<double> fps = cfg.fps;
  const auto meta = dir / "meta.json";
  if (!fps && std::filesystem::exists(meta)) {
    std::ifstream in(meta);
    try {
      const auto j = nlohmann::json::parse(in);
      fps = j.at("fps").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError(meta.string() + ": " + e.what());
    }
  }
  if (!fps)
    throw DecodeError(dir.string() +
                      ": image directory needs meta.json or a configured fps");

  FrameSequence seq;
  seq.video_id = dir.filename().string();
  seq.fps = FrameRate::from_double(*fps / static_cast<double>(
                                              std::max<std::size_t>(cfg.stride, 1)));
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!keep(i, cfg)) continue;
    const cv::Mat img = cv::imread(files[i].string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) throw DecodeError("cannot read image " + files[i].string());
    seq.frames.push_back(frame_from_mat(img));
    if (cfg.limit && seq.frames.size() >= cfg.limit) break;
  }
  return seq;
}

inline FrameSequence decode_container(const std::filesystem::path& path,
                                      const DecodeConfig& cfg) {
  cv::VideoCapture cap(path.string());
  if (!cap.isOpened()) throw DecodeError("cannot open video " + path.string());
  double fps = cfg.fps.value_or(cap.get(cv::CAP_PROP_FPS));
  if (!(fps > 0.0))
    throw DecodeError(path.string() + ": container reports no frame rate");
  FrameSequence seq;
  seq.video_id = path.stem().string();
  seq.fps = FrameRate::from_double(
      fps / static_cast<double>(std::max<std::size_t>(cfg.stride, 1)));
  cv::Mat mat;
  for (std::size_t i = 0; cap.read(mat); ++i) {
    if (!keep(i, cfg)) continue;
    seq.frames.push_back(frame_from_mat(mat));
    if (cfg.limit && seq.frames.size() >= cfg.limit) break;
  }
  return seq;
}

}  // namespace detail

/// Decodes a video container, or a directory of zero-padded numbered
/// PNG/JPEG frames with a sidecar meta.json {"fps": number}.
inline FrameSequence decode_video(const std::filesystem::path& path,
                                  const DecodeConfig& cfg = {}) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec))
    throw DecodeError("no such file: " + path.string());
  FrameSequence seq = std::filesystem::is_directory(path)
                          ? detail::decode_directory(path, cfg)
                          : detail::decode_container(path, cfg);
  if (seq.frames.empty())
    throw DecodeError("empty video: " + path.string());
  seq.validate();
  return seq;
}

/// Writes frames as frame_000000.png ... plus meta.json; the inverse of the
/// directory decode path.
inline void write_frame_directory(const FrameSequence& seq,
                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%06zu.png", i);
    if (!cv::imwrite((dir / name).string(),
                     detail::mat_from_frame(seq.frames[i])))
      throw DataError("cannot write " + (dir / name).string());
  }
  std::ofstream meta(dir / "meta.json");
  meta << nlohmann::json{{"fps", seq.fps.value()}}.dump() << "\n";
}

}  // namespace marine
