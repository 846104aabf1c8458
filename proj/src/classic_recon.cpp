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

#include "petrecon/classic_recon.hpp"

#include <algorithm>
#include <cmath>

#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

void check_data(const SystemModel& model, const Sinogram& y, const Sinogram& b) {
  const auto& g = model.geometry();
  if (y.n_angles != g.n_angles || y.n_bins != g.n_bins || b.n_angles != g.n_angles || b.n_bins != g.n_bins) {
    throw ShapeError("sinogram shape does not match geometry");
  }
}

void check_image(const SystemModel& model, std::span<const double> x) {
  if (x.size() != model.geometry().num_pixels()) throw ShapeError("image size does not match geometry");
  bool any_positive = false;
  for (double v : x) {
    if (v < 0.0 || !std::isfinite(v)) throw ConfigError("EM update requires a finite nonnegative image");
    any_positive = any_positive || v > 0.0;
  }
  if (!any_positive) throw ConfigError("EM update from an all-zero image (EM fixed point at zero)");
}

}  // namespace

void ReconConfig::validate() const {
  if (n_iterations < 1) throw ConfigError("n_iterations must be >= 1");
  if (n_subsets < 1) throw ConfigError("n_subsets must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(epsilon_em > 0.0)) throw ConfigError("epsilon_em must be > 0");
}

std::vector<AngleSubset> make_subsets(std::size_t n_angles, std::size_t n_subsets) {
  if (n_subsets < 1) throw ConfigError("n_subsets must be >= 1");
  if (n_subsets > n_angles) {
    throw ConfigError("empty subset: " + std::to_string(n_subsets) + " subsets over " + std::to_string(n_angles) +
                      " angles");
  }
  std::vector<AngleSubset> subsets(n_subsets);
  for (std::size_t a = 0; a < n_angles; ++a) subsets[a % n_subsets].push_back(a);
  return subsets;
}

EmStep em_step(const SystemModel& model, const AngleSubset& angles, std::span<const double> subset_sensitivity,
               std::span<const double> x_prev, const Sinogram& y, const Sinogram& b, double epsilon_em) {
  check_data(model, y, b);
  const std::size_t n_pix = model.geometry().num_pixels();
  if (x_prev.size() != n_pix || subset_sensitivity.size() != n_pix) throw ShapeError("em_step: image size mismatch");
  EmStep out;
  out.expected.assign(y.values.size(), 0.0);
  model.forward(x_prev, out.expected, angles);
  const std::size_t n_bins = model.geometry().n_bins;
  std::vector<double> ratio(y.values.size(), 0.0);
  auto visit = [&](std::size_t i) {
    out.expected[i] += b.values[i];
    ratio[i] = y.values[i] / std::max(out.expected[i], epsilon_em);
  };
  if (angles.empty()) {
    for (std::size_t i = 0; i < ratio.size(); ++i) visit(i);
  } else {
    for (std::size_t a : angles) {
      for (std::size_t k = 0; k < n_bins; ++k) visit(a * n_bins + k);
    }
  }
  out.backprojected_ratio.assign(n_pix, 0.0);
  model.back(ratio, out.backprojected_ratio, angles);
  out.x_em.resize(n_pix);
  const auto& seen = model.mask();
  for (std::size_t j = 0; j < n_pix; ++j) {
    if (subset_sensitivity[j] > 0.0) {
      out.x_em[j] = x_prev[j] * out.backprojected_ratio[j] / subset_sensitivity[j];
    } else {
      out.x_em[j] = seen[j] ? x_prev[j] : 0.0;
    }
  }
  return out;
}

Image2D mlem_update(const Image2D& x_prev, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                    double epsilon_em) {
  check_image(model, x_prev.values);
  Image2D out(x_prev.size, x_prev.pixel_size);
  out.values = em_step(model, {}, model.sensitivity().values, x_prev.values, y, b, epsilon_em).x_em;
  return out;
}

Image2D initial_image(const SystemModel& model) {
  const auto& g = model.geometry();
  Image2D x(g.image_size, g.pixel_size, 1.0);
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    if (!model.mask()[j]) x.values[j] = 0.0;
  }
  return x;
}

Image2D mlem_reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& model, std::size_t n_iterations,
                         double epsilon_em) {
  Image2D x = initial_image(model);
  for (std::size_t it = 0; it < n_iterations; ++it) x = mlem_update(x, y, b, model, epsilon_em);
  return x;
}

Image2D osem_reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& model, const ReconConfig& config,
                         const Image2D* x0) {
  config.validate();
  check_data(model, y, b);
  Image2D x = x0 ? *x0 : initial_image(model);
  check_image(model, x.values);
  const auto subsets = make_subsets(model.geometry().n_angles, config.n_subsets);
  std::vector<std::vector<double>> sens;
  sens.reserve(subsets.size());
  for (const auto& s : subsets) sens.push_back(model.subset_sensitivity(s));
  const double beta_subset = config.beta / static_cast<double>(config.n_subsets);
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    for (std::size_t k = 0; k < subsets.size(); ++k) {
      EmStep step = em_step(model, subsets[k], sens[k], x.values, y, b, config.epsilon_em);
      if (config.beta > 0.0) {
        x.values = depierro_quadratic_step(x.values, step.x_em, sens[k], x.size, beta_subset);
      } else {
        x.values = std::move(step.x_em);
      }
    }
  }
  return x;
}

std::vector<double> depierro_quadratic_step(std::span<const double> x_prev, std::span<const double> x_em,
                                            std::span<const double> sensitivity, std::size_t n, double beta) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  std::vector<double> out(x_em.begin(), x_em.end());
  if (beta == 0.0) return out;
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t r = 0; r < sn; ++r) {
    for (std::ptrdiff_t c = 0; c < sn; ++c) {
      const auto j = static_cast<std::size_t>(r * sn + c);
      const double s = sensitivity[j];
      if (!(s > 0.0)) continue;
      double weight = 0.0, t = 0.0;
      constexpr std::ptrdiff_t dr[4] = {-1, 1, 0, 0};
      constexpr std::ptrdiff_t dc[4] = {0, 0, -1, 1};
      for (int q = 0; q < 4; ++q) {
        const std::ptrdiff_t rr = r + dr[q], cc = c + dc[q];
        if (rr < 0 || rr >= sn || cc < 0 || cc >= sn) continue;
        weight += 1.0;
        t += x_prev[j] + x_prev[static_cast<std::size_t>(rr * sn + cc)];
      }
      if (weight == 0.0) continue;
      const double a2 = 2.0 * beta * weight;
      const double a1 = s - beta * t;
      const double c0 = s * x_em[j];
      const double disc = std::sqrt(a1 * a1 + 4.0 * a2 * c0);
      out[j] = a1 >= 0.0 ? 2.0 * c0 / (a1 + disc) : (disc - a1) / (2.0 * a2);
    }
  }
  return out;
}

Image2D mapem_update(const Image2D& x_prev, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                     double beta, double epsilon_em) {
  check_image(model, x_prev.values);
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  EmStep step = em_step(model, {}, model.sensitivity().values, x_prev.values, y, b, epsilon_em);
  Image2D out(x_prev.size, x_prev.pixel_size);
  out.values = depierro_quadratic_step(x_prev.values, step.x_em, model.sensitivity().values, x_prev.size, beta);
  return out;
}

double poisson_loglik(const Image2D& x, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                      double epsilon_em) {
  check_data(model, y, b);
  std::vector<double> ybar(y.values.size());
  model.forward(x.values, ybar);
  double total = 0.0;
  for (std::size_t i = 0; i < ybar.size(); ++i) {
    const double m = std::max(ybar[i] + b.values[i], epsilon_em);
    total += (y.values[i] > 0.0 ? y.values[i] * std::log(m) : 0.0) - m;
  }
  return total;
}

std::vector<double> poisson_loglik_gradient(const Image2D& x, const Sinogram& y, const Sinogram& b,
                                            const SystemModel& model, double epsilon_em) {
  check_data(model, y, b);
  std::vector<double> ybar(y.values.size());
  model.forward(x.values, ybar);
  std::vector<double> w(ybar.size());
  for (std::size_t i = 0; i < ybar.size(); ++i) {
    const double m = ybar[i] + b.values[i];
    // Below the floor the objective is constant in x.
    w[i] = m > epsilon_em ? y.values[i] / m - 1.0 : 0.0;
  }
  std::vector<double> grad(x.values.size());
  model.back(w, grad);
  return grad;
}

double quadratic_penalty(const Image2D& x) {
  const std::size_t n = x.size;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double v = x.at(r, c);
      if (c + 1 < n) total += (v - x.at(r, c + 1)) * (v - x.at(r, c + 1));
      if (r + 1 < n) total += (v - x.at(r + 1, c)) * (v - x.at(r + 1, c));
    }
  }
  // Each unordered pair appears twice in the 1/4 double sum.
  return 0.5 * total;
}

}  // namespace petrecon
