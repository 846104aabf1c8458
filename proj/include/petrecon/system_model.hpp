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

#ifndef PETRECON_SYSTEM_MODEL_HPP
#define PETRECON_SYSTEM_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "petrecon/geometry.hpp"
#include "petrecon/image.hpp"

namespace petrecon {

/// Row-compressed system matrix. Row i is the ray of detector pair
/// i = angle * n_bins + bin; values are intersection lengths in mm, columns
/// sorted ascending within each row.
struct SparseSystemMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> row_offsets;
  std::vector<std::uint32_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  // Throws IoError if the canonical-form invariants do not hold.
  void validate() const;
  bool operator==(const SparseSystemMatrix&) const = default;
};

SparseSystemMatrix build_system_matrix(const ScannerGeometry2D& geometry);

// SSM1: "SSM1", u64 I, J, nnz, u64 row_offsets[I+1], u32 cols[nnz], f64 values[nnz].
void save_system_matrix(const SparseSystemMatrix& matrix, const std::string& path);
SparseSystemMatrix load_system_matrix(const std::string& path);

/// Separable Gaussian blur with sigma = fwhm / (2 sqrt(2 ln 2)), truncated at
/// ceil(4 sigma) pixels and renormalized; zero padding outside the grid.
/// fwhm = 0 returns the input unchanged.
Image2D gaussian_blur(const Image2D& image, double fwhm_mm);
std::vector<double> gaussian_kernel_1d(double sigma_px);

/// Angle indices grouped into one subset of a sinogram. An empty list means
/// all angles.
using AngleSubset = std::vector<std::size_t>;

/// Scanner physics: the geometric matrix composed with an image-space PSF.
/// Immutable after construction and safe to share across threads.
class SystemModel {
 public:
  SystemModel(const ScannerGeometry2D& geometry, double psf_fwhm_mm);
  SystemModel(const ScannerGeometry2D& geometry, double psf_fwhm_mm, SparseSystemMatrix matrix);
  explicit SystemModel(const ScannerConfig& config) : SystemModel(config.geometry, config.psf_fwhm_mm) {}

  const ScannerGeometry2D& geometry() const { return geometry_; }
  const SparseSystemMatrix& matrix() const { return matrix_; }
  double psf_fwhm() const { return psf_fwhm_mm_; }
  ScannerConfig config() const { return {geometry_, psf_fwhm_mm_}; }

  // s_j = sum_i A_ij including the PSF adjoint.
  const Image2D& sensitivity() const { return sensitivity_; }
  // 1 where the sensitivity is positive; other pixels are excluded from EM.
  const std::vector<unsigned char>& mask() const { return mask_; }

  // Low-level projections over raw buffers. Only rows of the given angles
  // are computed (forward) or used (back); other sinogram entries are left
  // untouched by forward.
  void forward(std::span<const double> image, std::span<double> sino, const AngleSubset& angles = {}) const;
  void back(std::span<const double> sino, std::span<double> image, const AngleSubset& angles = {}) const;
  void blur(std::span<const double> in, std::span<double> out) const;

  // Backprojection of ones over the given angles.
  std::vector<double> subset_sensitivity(const AngleSubset& angles) const;

 private:
  void init();

  ScannerGeometry2D geometry_;
  double psf_fwhm_mm_;
  SparseSystemMatrix matrix_;
  std::vector<double> psf_kernel_;
  Image2D sensitivity_;
  std::vector<unsigned char> mask_;
};

Sinogram forward_project(const SystemModel& model, const Image2D& image);
Image2D back_project(const SystemModel& model, const Sinogram& sino);
Image2D sensitivity_image(const SystemModel& model);

}  // namespace petrecon

#endif  // PETRECON_SYSTEM_MODEL_HPP
