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

#ifndef PETRECON_SIMULATION_HPP
#define PETRECON_SIMULATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "petrecon/geometry.hpp"
#include "petrecon/image.hpp"
#include "petrecon/rng.hpp"
#include "petrecon/system_model.hpp"

namespace petrecon {

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // mm
  double ax = 1.0, ay = 1.0;  // semi-axes, mm
  double rotation = 0.0;      // rad
  double activity = 0.0;
};

struct HotDisk {
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
  double activity = 0.0;
};

/// Shapes are painted in order, later ones overwriting earlier ones:
/// ellipses first, then hot disks.
struct PhantomSpec {
  std::vector<Ellipse> ellipses;
  std::vector<HotDisk> hot_disks;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class PhantomFamily { kStandard, kElongated };

std::string to_string(PhantomFamily family);
PhantomFamily phantom_family_from_string(const std::string& name);

/// Brain-like slice: head outline (gray-matter rim), white matter, up to two
/// inner structures, and 3-6 hot disks of radius 2-8 mm at twice the
/// activity of the tissue under their center.
PhantomSpec random_brain_phantom(CounterRng& rng, const ScannerGeometry2D& geometry,
                                 PhantomFamily family = PhantomFamily::kStandard);

struct RenderedPhantom {
  Image2D image;
  // 1 on hot-disk pixels, 0 elsewhere.
  Image2D lesion_mask;
};

/// Pixel-center inclusion rasterization.
RenderedPhantom render_phantom(const PhantomSpec& spec, const ScannerGeometry2D& geometry);

struct ScanSimulation {
  Sinogram y;         // Poisson counts
  Sinogram b;         // uniform background expectation
  Sinogram expected;  // A x + b for the scaled phantom
  double scale = 1.0; // phantom multiplier giving sum(A x) = total_true_counts
};

/// Scales the phantom so its projection holds `total_true_counts`, adds a
/// uniform background holding background_fraction of the total, and draws
/// Poisson counts from a generator keyed by `seed`.
ScanSimulation simulate_scan(const Image2D& phantom, const SystemModel& model, double total_true_counts,
                             double background_fraction, std::uint64_t seed);

/// High-count label: OSEM with 10 iterations and 6 subsets.
Image2D make_label(const Sinogram& y_high, const Sinogram& b_high, const SystemModel& model,
                   std::size_t n_iterations = 10, std::size_t n_subsets = 6);

}  // namespace petrecon

#endif  // PETRECON_SIMULATION_HPP
