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

#ifndef PETRECON_IMAGE_HPP
#define PETRECON_IMAGE_HPP

#include <cstddef>
#include <vector>

namespace petrecon {

/// Square activity image, row-major, row 0 at the top (largest y).
struct Image2D {
  std::size_t size = 0;
  double pixel_size = 1.0;
  std::vector<double> values;

  Image2D() = default;
  Image2D(std::size_t n, double pixel_mm, double fill = 0.0)
      : size(n), pixel_size(pixel_mm), values(n * n, fill) {}

  std::size_t num_pixels() const { return values.size(); }
  double& at(std::size_t row, std::size_t col) { return values[row * size + col]; }
  double at(std::size_t row, std::size_t col) const { return values[row * size + col]; }
  double sum() const;
  double max() const;
};

/// Projection data indexed by (angle, bin); value i = angle * n_bins + bin.
struct Sinogram {
  std::size_t n_angles = 0;
  std::size_t n_bins = 0;
  std::vector<double> values;

  Sinogram() = default;
  Sinogram(std::size_t angles, std::size_t bins, double fill = 0.0)
      : n_angles(angles), n_bins(bins), values(angles * bins, fill) {}

  std::size_t num_bins_total() const { return values.size(); }
  double& at(std::size_t angle, std::size_t bin) { return values[angle * n_bins + bin]; }
  double at(std::size_t angle, std::size_t bin) const { return values[angle * n_bins + bin]; }
  double sum() const;
};

double dot(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace petrecon

#endif  // PETRECON_IMAGE_HPP
