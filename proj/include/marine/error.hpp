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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace marine {

/// Broad failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  config,   // exit 2
  data,     // exit 3
  numeric,  // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::numeric, what) {}
};

/// Malformed argument to a pure operation (shape mismatch, bad channel count).
struct InvalidInput : DataError {
  explicit InvalidInput(const std::string& what)
      : DataError("invalid input: " + what) {}
};

struct DecodeError : DataError {
  explicit DecodeError(const std::string& what)
      : DataError("decode error: " + what) {}
};

/// Binary feature file could not be parsed; carries the failing byte offset.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : DataError("format error at byte " + std::to_string(offset) + ": " +
                  what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A metric is undefined for its input (e.g. ROC AUC on a single class).
struct MetricError : DataError {
  explicit MetricError(const std::string& what)
      : DataError("metric error: " + what) {}
};

struct EmbedderError : DataError {
  explicit EmbedderError(const std::string& what)
      : DataError("embedder error: " + what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::data:
      return 3;
    case ErrorKind::numeric:
      return 4;
  }
  return 1;
}

}  // namespace marine
