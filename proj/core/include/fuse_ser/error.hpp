// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuse_ser {

enum class ErrorCode {
  kDimension,
  kParse,
  kDegenerate,
  kConfig,
  kUninitialized,
  kNumeric,
  kIo,
  kInvalidArgument,
};

const char* to_string(ErrorCode code);

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Shape mismatch; `axis` names the offending axis.
class DimensionError : public Error {
 public:
  DimensionError(std::string op, std::string axis, const std::string& detail)
      : Error(ErrorCode::kDimension, op + ": dimension mismatch on axis '" + axis + "': " + detail),
        op_(std::move(op)),
        axis_(std::move(axis)) {}
  const std::string& op() const noexcept { return op_; }
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string op_;
  std::string axis_;
};

/// Malformed input file. `line` is 1-based; 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& detail)
      : Error(ErrorCode::kParse, source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + detail),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A statistic is undefined for the given input (constant series, zero support, ...).
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error(ErrorCode::kDegenerate, what) {}
};

/// Invalid configuration; `field` is a dotted path into the config.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& detail)
      : Error(ErrorCode::kConfig, field + ": " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Non-finite value encountered during training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};

/// Eval-mode use of state that was never trained.
class UninitializedError : public Error {
 public:
  explicit UninitializedError(const std::string& what) : Error(ErrorCode::kUninitialized, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

}  // namespace fuse_ser
