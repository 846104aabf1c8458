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

#include "petrecon/image.hpp"

#include <algorithm>
#include <stdexcept>

#include "petrecon/errors.hpp"

namespace petrecon {

double Image2D::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

double Image2D::max() const {
  if (values.empty()) return 0.0;
  return *std::max_element(values.begin(), values.end());
}

double Sinogram::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace petrecon
