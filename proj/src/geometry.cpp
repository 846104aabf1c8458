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

#include "petrecon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

constexpr double kAxisEps = 1e-12;

struct RayLine {
  double px, py;  // point on the ray closest to the origin
  double dx, dy;  // unit direction
};

RayLine make_ray(std::size_t angle_index, std::size_t bin, const ScannerGeometry2D& g) {
  const double theta = g.angle(angle_index);
  const double u = g.bin_offset(bin);
  const double c = std::cos(theta), s = std::sin(theta);
  RayLine r{u * c, u * s, -s, c};
  if (std::abs(r.dx) < kAxisEps) r.dx = 0.0;
  if (std::abs(r.dy) < kAxisEps) r.dy = 0.0;
  return r;
}

// Parametric interval of the ray inside [-half, half)^2. Returns false on a miss.
bool clip_to_box(const RayLine& r, double half, double& tmin, double& tmax) {
  tmin = -std::numeric_limits<double>::infinity();
  tmax = std::numeric_limits<double>::infinity();
  auto clip_axis = [&](double p, double d) {
    if (d == 0.0) return p >= -half && p < half;
    double t1 = (-half - p) / d, t2 = (half - p) / d;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    return true;
  };
  if (!clip_axis(r.px, r.dx) || !clip_axis(r.py, r.dy)) return false;
  return tmax > tmin;
}

// Ascending parameters where the ray crosses grid planes strictly inside (tmin, tmax).
void plane_crossings(double p, double d, double half, double pixel, std::size_t n, double tmin, double tmax,
                     std::vector<double>& out) {
  out.clear();
  if (d == 0.0) return;
  for (std::size_t k = 0; k <= n; ++k) {
    const double plane = -half + static_cast<double>(k) * pixel;
    const double t = (plane - p) / d;
    if (t > tmin && t < tmax) out.push_back(t);
  }
  if (d < 0.0) std::reverse(out.begin(), out.end());
}

}  // namespace

double ScannerGeometry2D::angle(std::size_t index) const {
  return static_cast<double>(index) * std::numbers::pi / static_cast<double>(n_angles);
}

double ScannerGeometry2D::bin_offset(std::size_t bin) const {
  return (static_cast<double>(bin) - 0.5 * static_cast<double>(n_bins - 1)) * bin_spacing;
}

void ScannerGeometry2D::validate() const {
  if (n_angles < 1 || n_bins < 1 || image_size < 1) throw ConfigError("geometry counts must be >= 1");
  if (!(bin_spacing > 0.0) || !(pixel_size > 0.0)) throw ConfigError("geometry spacings must be positive");
  if (num_pixels() > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("image too large");
}

ScannerGeometry2D ScannerGeometry2D::desk(std::size_t image_size) {
  if (image_size < 1) throw ConfigError("image size must be >= 1");
  ScannerGeometry2D g;
  g.image_size = image_size;
  g.pixel_size = 2.0;
  g.bin_spacing = 2.0;
  g.n_angles = std::max<std::size_t>(1, (60 * image_size + 32) / 64);
  g.n_bins = 2 * ((95 * image_size) / 128) + 1;
  return g;
}

nlohmann::json to_json(const ScannerConfig& config) {
  const auto& g = config.geometry;
  return nlohmann::json{{"n_angles", g.n_angles},         {"n_bins", g.n_bins},
                        {"bin_spacing_mm", g.bin_spacing}, {"image_size", g.image_size},
                        {"pixel_size_mm", g.pixel_size},   {"psf_fwhm_mm", config.psf_fwhm_mm}};
}

ScannerConfig scanner_config_from_json(const nlohmann::json& j) {
  ScannerConfig c;
  try {
    c.geometry.n_angles = j.at("n_angles").get<std::size_t>();
    c.geometry.n_bins = j.at("n_bins").get<std::size_t>();
    c.geometry.bin_spacing = j.at("bin_spacing_mm").get<double>();
    c.geometry.image_size = j.at("image_size").get<std::size_t>();
    c.geometry.pixel_size = j.at("pixel_size_mm").get<double>();
    c.psf_fwhm_mm = j.value("psf_fwhm_mm", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid geometry document: ") + e.what());
  }
  c.geometry.validate();
  if (!(c.psf_fwhm_mm >= 0.0)) throw ConfigError("psf_fwhm_mm must be >= 0");
  return c;
}

ScannerConfig load_scanner_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open geometry file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse geometry file " + path + ": " + e.what());
  }
  return scanner_config_from_json(j);
}

void save_scanner_config(const ScannerConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(config).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

std::uint64_t geometry_hash(const ScannerConfig& config) {
  const std::string s = to_json(config).dump();
  return fnv1a64(s.data(), s.size());
}

double chord_length(std::size_t angle_index, std::size_t bin, const ScannerGeometry2D& geometry) {
  const RayLine r = make_ray(angle_index, bin, geometry);
  const double half = 0.5 * static_cast<double>(geometry.image_size) * geometry.pixel_size;
  double tmin, tmax;
  if (!clip_to_box(r, half, tmin, tmax)) return 0.0;
  return tmax - tmin;
}

std::vector<RaySegment> siddon_trace(std::size_t angle_index, std::size_t bin, const ScannerGeometry2D& geometry) {
  if (angle_index >= geometry.n_angles || bin >= geometry.n_bins) {
    throw ConfigError("siddon_trace: angle/bin outside geometry");
  }
  const RayLine r = make_ray(angle_index, bin, geometry);
  const std::size_t n = geometry.image_size;
  const double pixel = geometry.pixel_size;
  const double half = 0.5 * static_cast<double>(n) * pixel;
  double tmin, tmax;
  std::vector<RaySegment> segments;
  if (!clip_to_box(r, half, tmin, tmax)) return segments;

  std::vector<double> tx, ty;
  plane_crossings(r.px, r.dx, half, pixel, n, tmin, tmax, tx);
  plane_crossings(r.py, r.dy, half, pixel, n, tmin, tmax, ty);

  // Merge both crossing sequences between the entry and exit parameters.
  std::vector<double> ts;
  ts.reserve(tx.size() + ty.size() + 2);
  ts.push_back(tmin);
  std::merge(tx.begin(), tx.end(), ty.begin(), ty.end(), std::back_inserter(ts));
  ts.push_back(tmax);

  const double min_len = 1e-12 * pixel;
  const auto last = static_cast<double>(n - 1);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= min_len) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const double xm = r.px + tm * r.dx, ym = r.py + tm * r.dy;
    const double col = std::clamp(std::floor((xm + half) / pixel), 0.0, last);
    const double row = std::clamp(std::floor((half - ym) / pixel), 0.0, last);
    const auto pix = static_cast<std::uint32_t>(static_cast<std::size_t>(row) * n + static_cast<std::size_t>(col));
    segments.push_back({pix, len});
  }
  std::sort(segments.begin(), segments.end(), [](const RaySegment& a, const RaySegment& b) {
    return a.pixel < b.pixel;
  });
  // Rounding at corner crossings can revisit a pixel; fold duplicates.
  std::vector<RaySegment> merged;
  merged.reserve(segments.size());
  for (const auto& s : segments) {
    if (!merged.empty() && merged.back().pixel == s.pixel) {
      merged.back().length += s.length;
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace petrecon
