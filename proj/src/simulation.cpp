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

#include "petrecon/simulation.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "petrecon/classic_recon.hpp"
#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

bool inside_ellipse(const Ellipse& e, double x, double y) {
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  const double dx = x - e.cx, dy = y - e.cy;
  const double u = (c * dx + s * dy) / e.ax;
  const double v = (-s * dx + c * dy) / e.ay;
  return u * u + v * v <= 1.0;
}

bool inside_disk(const HotDisk& d, double x, double y) {
  const double dx = x - d.cx, dy = y - d.cy;
  return dx * dx + dy * dy <= d.radius * d.radius;
}

double tissue_at(const std::vector<Ellipse>& ellipses, double x, double y) {
  double v = 0.0;
  for (const auto& e : ellipses) {
    if (inside_ellipse(e, x, y)) v = e.activity;
  }
  return v;
}

// Point drawn uniformly inside `frac` times the ellipse.
void sample_in_ellipse(CounterRng& rng, const Ellipse& e, double frac, double& x, double& y) {
  const double rho = frac * std::sqrt(rng.uniform(0.0, 1.0));
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double u = rho * std::cos(phi) * e.ax, v = rho * std::sin(phi) * e.ay;
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  x = e.cx + c * u - s * v;
  y = e.cy + s * u + c * v;
}

}  // namespace

void PhantomSpec::validate() const {
  for (const auto& e : ellipses) {
    if (!(e.activity >= 0.0) || !(e.ax > 0.0) || !(e.ay > 0.0)) throw ConfigError("invalid ellipse in phantom spec");
  }
  for (const auto& d : hot_disks) {
    if (!(d.activity >= 0.0) || !(d.radius > 0.0)) throw ConfigError("invalid hot disk in phantom spec");
  }
}

std::string to_string(PhantomFamily family) {
  return family == PhantomFamily::kStandard ? "standard" : "elongated";
}

PhantomFamily phantom_family_from_string(const std::string& name) {
  if (name == "standard") return PhantomFamily::kStandard;
  if (name == "elongated") return PhantomFamily::kElongated;
  throw ConfigError("unknown phantom family: " + name);
}

PhantomSpec random_brain_phantom(CounterRng& rng, const ScannerGeometry2D& geometry, PhantomFamily family) {
  const double half = 0.5 * static_cast<double>(geometry.image_size) * geometry.pixel_size;
  PhantomSpec spec;
  spec.seed = rng.key();

  Ellipse head;
  head.cx = rng.uniform(-0.04, 0.04) * half;
  head.cy = rng.uniform(-0.04, 0.04) * half;
  if (family == PhantomFamily::kStandard) {
    head.ax = rng.uniform(0.70, 0.80) * half;
    head.ay = rng.uniform(0.80, 0.90) * half;
    head.rotation = rng.uniform(-0.3, 0.3);
  } else {
    head.ax = rng.uniform(0.48, 0.58) * half;
    head.ay = rng.uniform(0.86, 0.94) * half;
    head.rotation = rng.uniform(1.2, 1.9);
  }
  head.activity = 3.0 * rng.uniform(0.9, 1.1);
  spec.ellipses.push_back(head);

  Ellipse white = head;
  const double shrink = rng.uniform(0.70, 0.80);
  white.ax *= shrink;
  white.ay *= shrink;
  white.activity = 1.0 * rng.uniform(0.9, 1.1);
  spec.ellipses.push_back(white);

  const auto extra = static_cast<int>(rng() % 3);
  if (extra >= 1) {
    Ellipse ventricle = white;
    ventricle.ax = white.ax * rng.uniform(0.15, 0.25);
    ventricle.ay = white.ay * rng.uniform(0.25, 0.40);
    ventricle.activity = 0.3;
    spec.ellipses.push_back(ventricle);
  }
  if (extra >= 2) {
    Ellipse nucleus;
    sample_in_ellipse(rng, white, 0.5, nucleus.cx, nucleus.cy);
    nucleus.ax = white.ax * rng.uniform(0.12, 0.2);
    nucleus.ay = white.ay * rng.uniform(0.12, 0.2);
    nucleus.rotation = rng.uniform(0.0, std::numbers::pi);
    nucleus.activity = head.activity;
    spec.ellipses.push_back(nucleus);
  }

  const int n_disks = 3 + static_cast<int>(rng() % 4);
  for (int k = 0; k < n_disks; ++k) {
    HotDisk d;
    d.radius = rng.uniform(2.0, 8.0);
    sample_in_ellipse(rng, white, 0.75, d.cx, d.cy);
    d.activity = 2.0 * tissue_at(spec.ellipses, d.cx, d.cy);
    spec.hot_disks.push_back(d);
  }
  return spec;
}

RenderedPhantom render_phantom(const PhantomSpec& spec, const ScannerGeometry2D& geometry) {
  spec.validate();
  const std::size_t n = geometry.image_size;
  const double pixel = geometry.pixel_size;
  const double half = 0.5 * static_cast<double>(n) * pixel;
  RenderedPhantom out{Image2D(n, pixel), Image2D(n, pixel)};
  for (std::size_t r = 0; r < n; ++r) {
    const double y = half - (static_cast<double>(r) + 0.5) * pixel;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = -half + (static_cast<double>(c) + 0.5) * pixel;
      double v = 0.0;
      double lesion = 0.0;
      for (const auto& e : spec.ellipses) {
        if (inside_ellipse(e, x, y)) v = e.activity;
      }
      for (const auto& d : spec.hot_disks) {
        if (inside_disk(d, x, y)) {
          v = d.activity;
          lesion = 1.0;
        }
      }
      out.image.at(r, c) = v;
      out.lesion_mask.at(r, c) = lesion;
    }
  }
  return out;
}

ScanSimulation simulate_scan(const Image2D& phantom, const SystemModel& model, double total_true_counts,
                             double background_fraction, std::uint64_t seed) {
  if (!(total_true_counts > 0.0)) throw ConfigError("total_true_counts must be > 0");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    throw ConfigError("background_fraction must lie in [0, 1)");
  }
  const auto& g = model.geometry();
  if (phantom.size != g.image_size) throw ShapeError("phantom size does not match geometry");
  for (double v : phantom.values) {
    if (v < 0.0 || !std::isfinite(v)) throw ConfigError("phantom activities must be finite and >= 0");
  }
  ScanSimulation out;
  out.expected = forward_project(model, phantom);
  const double projected = out.expected.sum();
  if (!(projected > 0.0)) throw ConfigError("phantom is all zero (or invisible to the scanner)");
  out.scale = total_true_counts / projected;
  for (auto& v : out.expected.values) v *= out.scale;

  out.b = Sinogram(g.n_angles, g.n_bins);
  const double total_background = background_fraction / (1.0 - background_fraction) * total_true_counts;
  const double per_bin = total_background / static_cast<double>(out.b.values.size());
  for (auto& v : out.b.values) v = per_bin;
  for (std::size_t i = 0; i < out.expected.values.size(); ++i) out.expected.values[i] += out.b.values[i];

  out.y = Sinogram(g.n_angles, g.n_bins);
  CounterRng rng(seed);
  for (std::size_t i = 0; i < out.y.values.size(); ++i) {
    const double mean = out.expected.values[i];
    if (mean > 0.0) {
      std::poisson_distribution<long long> poisson(mean);
      out.y.values[i] = static_cast<double>(poisson(rng));
    }
  }
  return out;
}

Image2D make_label(const Sinogram& y_high, const Sinogram& b_high, const SystemModel& model, std::size_t n_iterations,
                   std::size_t n_subsets) {
  ReconConfig config;
  config.n_iterations = n_iterations;
  config.n_subsets = n_subsets;
  return osem_reconstruct(y_high, b_high, model, config);
}

}  // namespace petrecon
