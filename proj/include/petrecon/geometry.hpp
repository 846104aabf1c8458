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

#ifndef PETRECON_GEOMETRY_HPP
#define PETRECON_GEOMETRY_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace petrecon {

/// 2D parallel-beam scanner. Angles are uniform over [0, pi); the detector
/// and the square image grid are both centered on the origin.
struct ScannerGeometry2D {
  std::size_t n_angles = 60;
  std::size_t n_bins = 95;
  double bin_spacing = 2.0;  // mm
  std::size_t image_size = 64;
  double pixel_size = 2.0;  // mm

  std::size_t num_rays() const { return n_angles * n_bins; }
  std::size_t num_pixels() const { return image_size * image_size; }
  double angle(std::size_t index) const;
  // Signed detector coordinate of a bin center, mm.
  double bin_offset(std::size_t bin) const;

  void validate() const;

  /// Desk-scale default for a given image side: 64 gives 60 angles x 95
  /// bins, other sizes scale both counts proportionally.
  static ScannerGeometry2D desk(std::size_t image_size = 64);

  bool operator==(const ScannerGeometry2D&) const = default;
};

/// Geometry plus the image-space PSF width, as stored in geometry JSON.
struct ScannerConfig {
  ScannerGeometry2D geometry;
  double psf_fwhm_mm = 0.0;

  bool operator==(const ScannerConfig&) const = default;
};

nlohmann::json to_json(const ScannerConfig& config);
ScannerConfig scanner_config_from_json(const nlohmann::json& j);
ScannerConfig load_scanner_config(const std::string& path);
void save_scanner_config(const ScannerConfig& config, const std::string& path);
std::uint64_t geometry_hash(const ScannerConfig& config);

struct RaySegment {
  std::uint32_t pixel;
  double length;  // mm
};

/// Exact ray/grid intersection lengths by parametric traversal, sorted by
/// pixel index. A ray missing the grid yields an empty list.
std::vector<RaySegment> siddon_trace(std::size_t angle_index, std::size_t bin, const ScannerGeometry2D& geometry);

/// Length of the ray's chord through the image bounding box (0 on a miss).
double chord_length(std::size_t angle_index, std::size_t bin, const ScannerGeometry2D& geometry);

/// 64-bit FNV-1a, used for manifest and geometry fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace petrecon

#endif  // PETRECON_GEOMETRY_HPP
