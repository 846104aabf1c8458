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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "petrecon/classic_recon.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/simulation.hpp"

namespace petrecon {
namespace {

ScannerGeometry2D unit_geometry() {
  ScannerGeometry2D g;
  g.image_size = 1;
  g.pixel_size = 1.0;
  g.n_angles = 1;
  g.n_bins = 1;
  g.bin_spacing = 1.0;
  return g;
}

struct DeskCase {
  SystemModel model;
  Image2D phantom;
  ScanSimulation scan;
};

DeskCase desk_case(std::size_t n, std::uint64_t seed, double counts = 2e4, double bf = 0.2, double psf = 4.0) {
  const auto g = ScannerGeometry2D::desk(n);
  SystemModel model(g, psf);
  PhantomSpec spec;
  const double half = 0.5 * n * g.pixel_size;
  spec.ellipses.push_back({0, 0, 0.8 * half, 0.7 * half, 0.3, 1.0});
  spec.hot_disks.push_back({0.2 * half, 0.1 * half, 0.2 * half, 3.0});
  Image2D phantom = render_phantom(spec, g).image;
  ScanSimulation scan = simulate_scan(phantom, model, counts, bf, seed);
  return {std::move(model), std::move(phantom), std::move(scan)};
}

double rel_rmse(const Image2D& x, const Image2D& truth, double scale) {
  double se = 0, ref = 0;
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    const double t = truth.values[j] * scale;
    se += (x.values[j] - t) * (x.values[j] - t);
    ref += t * t;
  }
  return std::sqrt(se / ref);
}

TEST(MlemUpdate, IdentitySystem) {
  const SystemModel model(unit_geometry(), 0.0);
  ASSERT_DOUBLE_EQ(model.matrix().values.at(0), 1.0);
  const Image2D x0(1, 1.0, 1.0);
  const Image2D x1 = mlem_update(x0, Sinogram(1, 1, 5.0), Sinogram(1, 1, 0.0), model);
  EXPECT_DOUBLE_EQ(x1.values[0], 5.0);
}

TEST(MlemUpdate, ConsistentDataIsFixedPoint) {
  auto d = desk_case(8, 1);
  Image2D x = d.phantom;
  for (auto& v : x.values) v = v * 10.0 + 1.0;
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    if (!d.model.mask()[j]) x.values[j] = 0.0;
  }
  Sinogram y = forward_project(d.model, x);
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += d.scan.b.values[i];
  const Image2D x1 = mlem_update(x, y, d.scan.b, d.model);
  for (std::size_t j = 0; j < x.values.size(); ++j) EXPECT_NEAR(x1.values[j], x.values[j], 1e-10 * x.values[j]);
}

TEST(MlemUpdate, RejectsZeroAndNegativeImages) {
  auto d = desk_case(8, 1);
  Image2D zero(8, 2.0, 0.0);
  EXPECT_THROW(mlem_update(zero, d.scan.y, d.scan.b, d.model), ConfigError);
  Image2D neg(8, 2.0, 1.0);
  neg.values[3] = -1.0;
  EXPECT_THROW(mlem_update(neg, d.scan.y, d.scan.b, d.model), ConfigError);
  EXPECT_THROW(mlem_update(Image2D(4, 2.0, 1.0), d.scan.y, d.scan.b, d.model), ShapeError);
}

TEST(MlemUpdate, LikelihoodMonotoneOverFiftyUpdates) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto d = desk_case(8, seed, 2e3);
    Image2D x = initial_image(d.model);
    double prev = poisson_loglik(x, d.scan.y, d.scan.b, d.model);
    for (int k = 0; k < 50; ++k) {
      x = mlem_update(x, d.scan.y, d.scan.b, d.model);
      const double cur = poisson_loglik(x, d.scan.y, d.scan.b, d.model);
      EXPECT_GE(cur, prev - 1e-9 * std::abs(prev)) << "seed " << seed << " update " << k;
      prev = cur;
    }
  }
}

TEST(MlemUpdate, CountPreservationWithoutBackground) {
  auto d = desk_case(16, 4, 1e4, 0.0);
  const double total = d.scan.y.sum();
  Image2D x = initial_image(d.model);
  for (int k = 0; k < 10; ++k) {
    x = mlem_update(x, d.scan.y, d.scan.b, d.model);
    double weighted = 0.0;
    for (std::size_t j = 0; j < x.values.size(); ++j) weighted += d.model.sensitivity().values[j] * x.values[j];
    EXPECT_NEAR(weighted, total, 1e-9 * total);
  }
}

TEST(MlemUpdate, NonnegativeAndMasked) {
  auto d = desk_case(16, 5);
  Image2D x = initial_image(d.model);
  for (int k = 0; k < 5; ++k) {
    x = mlem_update(x, d.scan.y, d.scan.b, d.model);
    for (std::size_t j = 0; j < x.values.size(); ++j) {
      EXPECT_GE(x.values[j], 0.0);
      if (!d.model.mask()[j]) EXPECT_EQ(x.values[j], 0.0);
    }
  }
}

TEST(Subsets, InterleavedAssignment) {
  const auto s = make_subsets(30, 6);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_EQ(s[0], (AngleSubset{0, 6, 12, 18, 24}));
  EXPECT_EQ(s[5], (AngleSubset{5, 11, 17, 23, 29}));
  EXPECT_THROW(make_subsets(4, 6), ConfigError);
  EXPECT_THROW(make_subsets(4, 0), ConfigError);
}

TEST(Osem, OneSubsetEqualsMlemBitwise) {
  auto d = desk_case(16, 6);
  ReconConfig c;
  c.n_iterations = 7;
  c.n_subsets = 1;
  const Image2D os = osem_reconstruct(d.scan.y, d.scan.b, d.model, c);
  const Image2D ml = mlem_reconstruct(d.scan.y, d.scan.b, d.model, 7);
  EXPECT_EQ(os.values, ml.values);
}

TEST(Osem, DeterministicAndNonnegative) {
  auto d = desk_case(16, 7);
  const ReconConfig c;
  const Image2D a = osem_reconstruct(d.scan.y, d.scan.b, d.model, c);
  const Image2D b = osem_reconstruct(d.scan.y, d.scan.b, d.model, c);
  EXPECT_EQ(a.values, b.values);
  for (double v : a.values) EXPECT_GE(v, 0.0);
}

TEST(Osem, TenIterationsBeatOne) {
  auto d = desk_case(32, 8, 5e4);
  ReconConfig one;
  one.n_iterations = 1;
  const ReconConfig ten;
  const double e1 = rel_rmse(osem_reconstruct(d.scan.y, d.scan.b, d.model, one), d.phantom, d.scan.scale);
  const double e10 = rel_rmse(osem_reconstruct(d.scan.y, d.scan.b, d.model, ten), d.phantom, d.scan.scale);
  EXPECT_LT(e10, e1);
}

TEST(Osem, ExplicitStartImage) {
  auto d = desk_case(16, 9);
  ReconConfig c;
  c.n_iterations = 2;
  const Image2D ones = initial_image(d.model);
  EXPECT_EQ(osem_reconstruct(d.scan.y, d.scan.b, d.model, c, &ones).values,
            osem_reconstruct(d.scan.y, d.scan.b, d.model, c).values);
  Image2D twos = ones;
  for (auto& v : twos.values) v *= 2.0;
  EXPECT_NE(osem_reconstruct(d.scan.y, d.scan.b, d.model, c, &twos).values,
            osem_reconstruct(d.scan.y, d.scan.b, d.model, c).values);
}

TEST(Mapem, ZeroBetaEqualsMlemBitwise) {
  auto d = desk_case(16, 10);
  Image2D x = initial_image(d.model);
  for (int k = 0; k < 3; ++k) {
    const Image2D m = mapem_update(x, d.scan.y, d.scan.b, d.model, 0.0);
    const Image2D e = mlem_update(x, d.scan.y, d.scan.b, d.model);
    EXPECT_EQ(m.values, e.values);
    x = e;
  }
}

TEST(Mapem, ConstantImageWithExactDataIsFixedPoint) {
  const auto g = ScannerGeometry2D::desk(8);
  const SystemModel model(g, 0.0);
  Image2D x(8, g.pixel_size, 0.0);
  for (std::size_t j = 0; j < x.values.size(); ++j) x.values[j] = model.mask()[j] ? 3.0 : 0.0;
  ASSERT_EQ(std::count(model.mask().begin(), model.mask().end(), 1), 64);
  const Sinogram b(g.n_angles, g.n_bins, 0.5);
  Sinogram y = forward_project(model, x);
  for (auto& v : y.values) v += 0.5;
  const Image2D x1 = mapem_update(x, y, b, model, 0.3);
  for (std::size_t j = 0; j < x.values.size(); ++j) EXPECT_NEAR(x1.values[j], 3.0, 1e-12);
}

TEST(Mapem, PenalizedObjectiveMonotone) {
  for (std::uint64_t seed : {11u, 12u}) {
    auto d = desk_case(8, seed, 2e3);
    for (double beta : {0.005, 0.5}) {
      Image2D x = initial_image(d.model);
      auto objective = [&](const Image2D& im) {
        return poisson_loglik(im, d.scan.y, d.scan.b, d.model) - beta * quadratic_penalty(im);
      };
      double prev = objective(x);
      for (int k = 0; k < 50; ++k) {
        x = mapem_update(x, d.scan.y, d.scan.b, d.model, beta);
        const double cur = objective(x);
        EXPECT_GE(cur, prev - 1e-9 * std::abs(prev)) << "beta " << beta << " update " << k;
        for (double v : x.values) EXPECT_GE(v, 0.0);
        prev = cur;
      }
    }
  }
}

TEST(Mapem, DePierroRootSolvesQuadratic) {
  const std::size_t n = 3;
  std::vector<double> prev{1, 2, 3, 4, 5, 6, 7, 8, 9}, em{2, 1, 4, 3, 6, 5, 8, 7, 10}, s(9, 2.5);
  const double beta = 0.7;
  const auto out = depierro_quadratic_step(prev, em, s, n, beta);
  for (std::size_t j = 0; j < 9; ++j) {
    const std::size_t r = j / n, c = j % n;
    double w = 0, t = 0;
    auto add = [&](std::size_t m) {
      w += 1;
      t += prev[j] + prev[m];
    };
    if (r > 0) add(j - n);
    if (r + 1 < n) add(j + n);
    if (c > 0) add(j - 1);
    if (c + 1 < n) add(j + 1);
    const double x = out[j];
    EXPECT_GT(x, 0.0);
    EXPECT_NEAR(2 * beta * w * x * x + (s[j] - beta * t) * x - s[j] * em[j], 0.0, 1e-12);
  }
}

TEST(Mapem, OsMapemDeterministicAndNonnegative) {
  auto d = desk_case(16, 13);
  ReconConfig c;
  c.beta = 0.005;
  const Image2D a = osem_reconstruct(d.scan.y, d.scan.b, d.model, c);
  EXPECT_EQ(a.values, osem_reconstruct(d.scan.y, d.scan.b, d.model, c).values);
  for (double v : a.values) EXPECT_GE(v, 0.0);
  c.beta = 0.0;
  EXPECT_NE(a.values, osem_reconstruct(d.scan.y, d.scan.b, d.model, c).values);
}

TEST(PoissonLoglik, ZeroDataAndSingleBin) {
  const SystemModel model(unit_geometry(), 0.0);
  const Image2D x(1, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(poisson_loglik(x, Sinogram(1, 1, 0.0), Sinogram(1, 1, 0.5), model), -2.5);
  EXPECT_DOUBLE_EQ(poisson_loglik(x, Sinogram(1, 1, 2.0), Sinogram(1, 1, 0.0), model), 2 * std::log(2.0) - 2);
}

TEST(PoissonLoglik, GradientMatchesFiniteDifferences) {
  ScannerGeometry2D g;
  g.image_size = 2;
  g.pixel_size = 1.0;
  g.n_angles = 4;
  g.n_bins = 5;
  g.bin_spacing = 0.6;
  const SystemModel model(g, 0.0);
  Image2D x(2, 1.0);
  x.values = {0.7, 1.3, 2.1, 0.4};
  Sinogram y(4, 5), b(4, 5, 0.05);
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] = static_cast<double>((i * 7) % 4);
  const auto grad = poisson_loglik_gradient(x, y, b, model);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 4; ++j) {
    Image2D p = x, m = x;
    p.values[j] += h;
    m.values[j] -= h;
    const double fd = (poisson_loglik(p, y, b, model) - poisson_loglik(m, y, b, model)) / (2 * h);
    EXPECT_LT(std::abs(fd - grad[j]) / std::max(std::abs(grad[j]), 1e-6), 1e-6) << j;
  }
}

TEST(QuadraticPenalty, Examples) {
  Image2D c(4, 1.0, 2.5);
  EXPECT_EQ(quadratic_penalty(c), 0.0);
  Image2D x(2, 1.0);
  x.values = {1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(quadratic_penalty(x), 1.0);
}

TEST(ReconConfig, Validation) {
  ReconConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ReconConfig{};
  c.n_subsets = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace petrecon
