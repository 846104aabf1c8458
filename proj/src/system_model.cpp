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

#include "petrecon/system_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "petrecon/binary_io.hpp"
#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

const double kFwhmToSigma = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));

// One separable pass along rows (horizontal) or columns, zero padding.
void blur_pass(std::span<const double> in, std::span<double> out, std::size_t n, const std::vector<double>& k,
               bool horizontal) {
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t r = 0; r < sn; ++r) {
    for (std::ptrdiff_t c = 0; c < sn; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const std::ptrdiff_t rr = horizontal ? r : r + t;
        const std::ptrdiff_t cc = horizontal ? c + t : c;
        if (rr < 0 || rr >= sn || cc < 0 || cc >= sn) continue;
        acc += k[static_cast<std::size_t>(t + radius)] * in[static_cast<std::size_t>(rr * sn + cc)];
      }
      out[static_cast<std::size_t>(r * sn + c)] = acc;
    }
  }
}

template <typename Fn>
void for_each_row(const SparseSystemMatrix& m, std::size_t n_bins, const AngleSubset& angles, Fn&& fn) {
  if (angles.empty()) {
    for (std::size_t i = 0; i < m.rows; ++i) fn(i);
    return;
  }
  for (std::size_t a : angles) {
    for (std::size_t b = 0; b < n_bins; ++b) fn(a * n_bins + b);
  }
}

}  // namespace

void SparseSystemMatrix::validate() const {
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 || row_offsets.back() != values.size() ||
      col_indices.size() != values.size()) {
    throw IoError("system matrix: inconsistent sizes");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) throw IoError("system matrix: row offsets not monotone");
    for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      if (col_indices[k] >= cols) throw IoError("system matrix: column index out of range");
      if (!(values[k] > 0.0)) throw IoError("system matrix: nonpositive value");
      if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) {
        throw IoError("system matrix: row not sorted by column");
      }
    }
  }
}

SparseSystemMatrix build_system_matrix(const ScannerGeometry2D& geometry) {
  geometry.validate();
  SparseSystemMatrix m;
  m.rows = geometry.num_rays();
  m.cols = geometry.num_pixels();
  m.row_offsets.reserve(m.rows + 1);
  m.row_offsets.push_back(0);
  for (std::size_t a = 0; a < geometry.n_angles; ++a) {
    for (std::size_t b = 0; b < geometry.n_bins; ++b) {
      for (const auto& seg : siddon_trace(a, b, geometry)) {
        m.col_indices.push_back(seg.pixel);
        m.values.push_back(seg.length);
      }
      m.row_offsets.push_back(m.values.size());
    }
  }
  return m;
}

void save_system_matrix(const SparseSystemMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  binio::write_magic(out, "SSM1");
  binio::write_u64(out, matrix.rows);
  binio::write_u64(out, matrix.cols);
  binio::write_u64(out, matrix.nnz());
  for (auto v : matrix.row_offsets) binio::write_u64(out, v);
  for (auto v : matrix.col_indices) binio::write_u32(out, v);
  for (auto v : matrix.values) binio::write_f64(out, v);
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

SparseSystemMatrix load_system_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  binio::expect_magic(in, "SSM1", path);
  SparseSystemMatrix m;
  m.rows = binio::read_u64(in);
  m.cols = binio::read_u64(in);
  const std::uint64_t nnz = binio::read_u64(in);
  if (m.rows > (1ull << 32) || nnz > (1ull << 34)) throw IoError(path + ": sizes out of range");
  m.row_offsets.resize(m.rows + 1);
  for (auto& v : m.row_offsets) v = binio::read_u64(in);
  m.col_indices.resize(nnz);
  for (auto& v : m.col_indices) v = binio::read_u32(in);
  m.values.resize(nnz);
  for (auto& v : m.values) v = binio::read_f64(in);
  m.validate();
  return m;
}

std::vector<double> gaussian_kernel_1d(double sigma_px) {
  if (!(sigma_px > 0.0)) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma_px));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(t + radius)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

Image2D gaussian_blur(const Image2D& image, double fwhm_mm) {
  if (!(fwhm_mm >= 0.0)) throw ConfigError("gaussian_blur: fwhm must be >= 0");
  if (fwhm_mm == 0.0) return image;
  const auto k = gaussian_kernel_1d(fwhm_mm * kFwhmToSigma / image.pixel_size);
  Image2D tmp(image.size, image.pixel_size);
  Image2D out(image.size, image.pixel_size);
  blur_pass(image.values, tmp.values, image.size, k, true);
  blur_pass(tmp.values, out.values, image.size, k, false);
  return out;
}

SystemModel::SystemModel(const ScannerGeometry2D& geometry, double psf_fwhm_mm)
    : SystemModel(geometry, psf_fwhm_mm, build_system_matrix(geometry)) {}

SystemModel::SystemModel(const ScannerGeometry2D& geometry, double psf_fwhm_mm, SparseSystemMatrix matrix)
    : geometry_(geometry), psf_fwhm_mm_(psf_fwhm_mm), matrix_(std::move(matrix)) {
  geometry_.validate();
  if (!(psf_fwhm_mm_ >= 0.0)) throw ConfigError("psf fwhm must be >= 0");
  if (matrix_.rows != geometry_.num_rays() || matrix_.cols != geometry_.num_pixels()) {
    throw ShapeError("system matrix does not match geometry");
  }
  init();
}

void SystemModel::init() {
  if (psf_fwhm_mm_ > 0.0) psf_kernel_ = gaussian_kernel_1d(psf_fwhm_mm_ * kFwhmToSigma / geometry_.pixel_size);
  sensitivity_ = Image2D(geometry_.image_size, geometry_.pixel_size);
  sensitivity_.values = subset_sensitivity({});
  mask_.resize(sensitivity_.values.size());
  for (std::size_t j = 0; j < mask_.size(); ++j) mask_[j] = sensitivity_.values[j] > 0.0 ? 1 : 0;
}

void SystemModel::blur(std::span<const double> in, std::span<double> out) const {
  if (psf_kernel_.empty()) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  std::vector<double> tmp(in.size());
  blur_pass(in, tmp, geometry_.image_size, psf_kernel_, true);
  blur_pass(tmp, out, geometry_.image_size, psf_kernel_, false);
}

void SystemModel::forward(std::span<const double> image, std::span<double> sino, const AngleSubset& angles) const {
  if (image.size() != matrix_.cols || sino.size() != matrix_.rows) throw ShapeError("forward: buffer size mismatch");
  std::vector<double> blurred(image.size());
  blur(image, blurred);
  for_each_row(matrix_, geometry_.n_bins, angles, [&](std::size_t i) {
    double acc = 0.0;
    for (auto k = matrix_.row_offsets[i]; k < matrix_.row_offsets[i + 1]; ++k) {
      acc += matrix_.values[k] * blurred[matrix_.col_indices[k]];
    }
    sino[i] = acc;
  });
}

void SystemModel::back(std::span<const double> sino, std::span<double> image, const AngleSubset& angles) const {
  if (image.size() != matrix_.cols || sino.size() != matrix_.rows) throw ShapeError("back: buffer size mismatch");
  std::vector<double> raw(image.size(), 0.0);
  for_each_row(matrix_, geometry_.n_bins, angles, [&](std::size_t i) {
    const double yi = sino[i];
    for (auto k = matrix_.row_offsets[i]; k < matrix_.row_offsets[i + 1]; ++k) {
      raw[matrix_.col_indices[k]] += matrix_.values[k] * yi;
    }
  });
  blur(raw, image);
}

std::vector<double> SystemModel::subset_sensitivity(const AngleSubset& angles) const {
  std::vector<double> ones(matrix_.rows, 1.0);
  std::vector<double> s(matrix_.cols, 0.0);
  back(ones, s, angles);
  return s;
}

Sinogram forward_project(const SystemModel& model, const Image2D& image) {
  const auto& g = model.geometry();
  if (image.size != g.image_size) throw ShapeError("forward_project: image size does not match geometry");
  Sinogram out(g.n_angles, g.n_bins);
  model.forward(image.values, out.values);
  return out;
}

Image2D back_project(const SystemModel& model, const Sinogram& sino) {
  const auto& g = model.geometry();
  if (sino.n_angles != g.n_angles || sino.n_bins != g.n_bins) {
    throw ShapeError("back_project: sinogram shape does not match geometry");
  }
  Image2D out(g.image_size, g.pixel_size);
  model.back(sino.values, out.values);
  return out;
}

Image2D sensitivity_image(const SystemModel& model) { return model.sensitivity(); }

}  // namespace petrecon
