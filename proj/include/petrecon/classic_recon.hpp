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

#ifndef PETRECON_CLASSIC_RECON_HPP
#define PETRECON_CLASSIC_RECON_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "petrecon/image.hpp"
#include "petrecon/system_model.hpp"

namespace petrecon {

inline constexpr double kDefaultEmEpsilon = 1e-12;

struct ReconConfig {
  std::size_t n_iterations = 10;
  std::size_t n_subsets = 6;
  // Quadratic penalty weight; 0 selects plain (OS)EM.
  double beta = 0.0;
  // Floor applied to expected counts in every ratio y / ybar.
  double epsilon_em = kDefaultEmEpsilon;

  void validate() const;
};

/// Interleaved angle subsets: angle k goes to subset k mod n_subsets.
/// Throws ConfigError if any subset would be empty.
std::vector<AngleSubset> make_subsets(std::size_t n_angles, std::size_t n_subsets);

/// Intermediates of one EM update over a subset of rows.
struct EmStep {
  std::vector<double> x_em;
  // ybar = A x + b over the subset rows (zero elsewhere), unfloored.
  std::vector<double> expected;
  // A^T (y / max(ybar, eps)) over the subset rows.
  std::vector<double> backprojected_ratio;
};

/// Multiplicative EM update restricted to `angles`, with the matching subset
/// sensitivity. Pixels with zero subset sensitivity keep their value when
/// the model can see them at all and are zero otherwise.
EmStep em_step(const SystemModel& model, const AngleSubset& angles, std::span<const double> subset_sensitivity,
               std::span<const double> x_prev, const Sinogram& y, const Sinogram& b,
               double epsilon_em = kDefaultEmEpsilon);

Image2D mlem_update(const Image2D& x_prev, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                    double epsilon_em = kDefaultEmEpsilon);

/// All-ones image on the model's field of view (zero on masked pixels).
Image2D initial_image(const SystemModel& model);

Image2D mlem_reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& model, std::size_t n_iterations,
                         double epsilon_em = kDefaultEmEpsilon);

/// OSEM (or OS-MAPEM when config.beta > 0) from x0, default all ones.
Image2D osem_reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& model, const ReconConfig& config,
                         const Image2D* x0 = nullptr);

/// One De Pierro MAP-EM update for the quadratic 4-neighbour penalty.
Image2D mapem_update(const Image2D& x_prev, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                     double beta, double epsilon_em = kDefaultEmEpsilon);

/// Positive root of 2 beta W x^2 + (s - beta T) x - s x_em = 0 for every
/// pixel, with W and T from the 4-neighbourhood of x_prev. beta = 0 returns
/// x_em unchanged.
std::vector<double> depierro_quadratic_step(std::span<const double> x_prev, std::span<const double> x_em,
                                            std::span<const double> sensitivity, std::size_t image_size,
                                            double beta);

/// L(y|x) = sum_i y_i log ybar_i - ybar_i, ybar = A x + b floored at eps.
double poisson_loglik(const Image2D& x, const Sinogram& y, const Sinogram& b, const SystemModel& model,
                      double epsilon_em = kDefaultEmEpsilon);

/// Gradient of poisson_loglik: A^T (y / ybar - 1).
std::vector<double> poisson_loglik_gradient(const Image2D& x, const Sinogram& y, const Sinogram& b,
                                            const SystemModel& model, double epsilon_em = kDefaultEmEpsilon);

/// R(x) = 1/4 sum_j sum_{m in N_j} (x_j - x_m)^2 over the 4-neighbourhood.
double quadratic_penalty(const Image2D& x);

}  // namespace petrecon

#endif  // PETRECON_CLASSIC_RECON_HPP
