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


#ifndef PETRECON_TESTS_ORACLES_HPP
#define PETRECON_TESTS_ORACLES_HPP

#include <cmath>

#include "petrecon/image.hpp"

namespace petrecon::testing {

/// Root of x^2/a + (1 - r/a) x - e on x >= 0 by bisection. The left side is
/// increasing there and starts at -e <= 0.
inline double bisection_root(double e, double r, double a) {
  auto f = [&](double x) { return x * x / a + (1.0 - r / a) * x - e; };
  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Mean SSIM computed window by window with explicit double loops: 11x11
/// Gaussian weights (sigma 1.5), K1 0.01, K2 0.03, data range 1.
inline double ssim_oracle(const Image2D& a, const Image2D& b) {
  const int w = 11, half = 5;
  double g[11], total = 0;
  for (int i = 0; i < w; ++i) total += g[i] = std::exp(-(i - half) * (i - half) / (2 * 1.5 * 1.5));
  for (double& v : g) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int n = static_cast<int>(a.size);
  double sum = 0;
  int count = 0;
  for (int r0 = 0; r0 + w <= n; ++r0) {
    for (int c0 = 0; c0 + w <= n; ++c0) {
      double ma = 0, mb = 0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          ma += g[i] * g[j] * a.at(r0 + i, c0 + j);
          mb += g[i] * g[j] * b.at(r0 + i, c0 + j);
        }
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const double da = a.at(r0 + i, c0 + j) - ma, db = b.at(r0 + i, c0 + j) - mb;
          va += g[i] * g[j] * da * da;
          vb += g[i] * g[j] * db * db;
          cov += g[i] * g[j] * da * db;
        }
      }
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return sum / count;
}

}  // namespace petrecon::testing

#endif  // PETRECON_TESTS_ORACLES_HPP
