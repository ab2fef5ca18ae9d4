/*
 * Copyright 2026 The HetNoise Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hetnoise {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexMatrix = Eigen::MatrixXi;

// Version tag written into every serialized document.
inline constexpr int kFormatVersion = 1;

inline const char* toolkit_version() { return HETNOISE_VERSION; }

// Malformed numeric input (non-finite values, shape mismatches).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration outside its valid domain (tau <= 0, zero samples, ...).
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A metric whose value is not defined for the given data.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Optimisation produced a non-finite loss, gradient or parameter.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, std::string parameter_path)
      : std::runtime_error(what + (parameter_path.empty() ? "" : " at " + parameter_path)),
        parameter_path_(std::move(parameter_path)) {}

  const std::string& parameter_path() const { return parameter_path_; }

 private:
  std::string parameter_path_;
};

// Malformed file contents or failed I/O.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LabelMode { multiclass, multilabel };

std::string to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& name);

}  // namespace hetnoise
