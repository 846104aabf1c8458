// Copyright 2026 The petrecon Authors. All Rights Reserved.
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

#ifndef PETRECON_ERRORS_HPP
#define PETRECON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace petrecon {

// Shape or size disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration or precondition violation on user-supplied values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required artifact (checkpoint, dataset) does not exist.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf or another numeric breakdown during a computation.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::string dump_path = {})
      : std::runtime_error(what), dump_path_(std::move(dump_path)) {}
  const std::string& dump_path() const { return dump_path_; }

 private:
  std::string dump_path_;
};

}  // namespace petrecon

#endif  // PETRECON_ERRORS_HPP
