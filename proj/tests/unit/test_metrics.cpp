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
#include <limits>

#include "oracles.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/metrics.hpp"
#include "petrecon/rng.hpp"

namespace petrecon {
namespace {

using petrecon::testing::ssim_oracle;

Image2D random_image(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  CounterRng rng(seed);
  Image2D x(n, 1.0);
  for (double& v : x.values) v = rng.uniform(lo, hi);
  return x;
}

TEST(Normalize, Examples) {
  Image2D x(1, 1.0);
  x.values = {0.0};
  EXPECT_THROW(normalize_max1(x), ConfigError);
  Image2D a(2, 1.0);
  a.values = {0.0, 2.0, 4.0, 1.0};
  EXPECT_EQ(normalize_max1(a).values, (std::vector<double>{0.0, 0.5, 1.0, 0.25}));
  const Image2D n = normalize_max1(random_image(8, 1));
  EXPECT_EQ(normalize_max1(n).values, n.values);
}

TEST(Normalize, ScaleInvariant) {
  const Image2D x = random_image(8, 2);
  Image2D y = x;
  for (double& v : y.values) v *= 4.0;
  EXPECT_EQ(normalize_max1(x).values, normalize_max1(y).values);
}

TEST(Psnr, IdenticalIsInfinite) {
  const Image2D x = random_image(8, 3);
  EXPECT_EQ(psnr(x, x), std::numeric_limits<double>::infinity());
  EXPECT_EQ(format_metric(psnr(x, x)), "inf");
}

TEST(Psnr, TwentyDecibels) {
  EXPECT_NEAR(psnr(Image2D(4, 1.0, 1.0), Image2D(4, 1.0, 0.9)), 20.0, 1e-10);
}

TEST(Psnr, DirectFormulaOracle) {
  const Image2D a = random_image(12, 4), b = random_image(12, 5);
  double se = 0;
  for (std::size_t j = 0; j < a.values.size(); ++j) se += (a.values[j] - b.values[j]) * (a.values[j] - b.values[j]);
  EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(se / a.values.size()), 1e-10);
  EXPECT_THROW(psnr(a, random_image(8, 6)), ShapeError);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Image2D ref = normalize_max1(random_image(16, 7));
  CounterRng rng(8);
  Image2D noise(16, 1.0);
  for (double& v : noise.values) v = rng.uniform(-1.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.02, 0.04}) {
    Image2D t = ref;
    for (std::size_t j = 0; j < t.values.size(); ++j) t.values[j] += amp * noise.values[j];
    const double p = psnr(ref, t);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, IdentityAndSymmetry) {
  const Image2D a = random_image(20, 9), b = random_image(20, 10);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  const double s = ssim(a, b);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
  EXPECT_NEAR(ssim(Image2D(16, 1.0, 0.0), Image2D(16, 1.0, 0.0)), 1.0, 1e-12);
}

TEST(Ssim, SlidingWindowOracle) {
  const Image2D a = random_image(16, 11);
  Image2D b = a;
  CounterRng rng(12);
  for (double& v : b.values) v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-8);
  const Image2D c = random_image(16, 13);
  EXPECT_NEAR(ssim(a, c), ssim_oracle(a, c), 1e-8);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(random_image(16, 1), random_image(12, 1)), ShapeError);
  EXPECT_THROW(ssim(random_image(8, 1), random_image(8, 2)), ShapeError);
}

Image2D mask_of(std::size_t n, std::vector<std::size_t> on) {
  Image2D m(n, 1.0);
  for (std::size_t j : on) m.values[j] = 1.0;
  return m;
}

TEST(Mcrc, Examples) {
  const Image2D truth = random_image(4, 14, 1.0, 3.0);
  const Image2D mask = mask_of(4, {1, 2, 5});
  std::vector<Image2D> t{truth}, m{mask};
  std::vector<Image2D> same{truth};
  EXPECT_EQ(mcrc(same, t, m), 1.0);
  Image2D half = truth;
  for (double& v : half.values) v *= 0.5;
  std::vector<Image2D> h{half};
  EXPECT_NEAR(mcrc(h, t, m), 0.5, 1e-15);

  Image2D t1(2, 1.0, 2.0), t2(2, 1.0, 4.0);
  Image2D r1(2, 1.0, 1.6), r2(2, 1.0, 4.0);
  std::vector<Image2D> recons{r1, r2}, truths{t1, t2}, masks{mask_of(2, {0, 3}), mask_of(2, {1})};
  EXPECT_NEAR(mcrc(recons, truths, masks), 0.9, 1e-15);
}

TEST(Mcrc, EmptyMasksSkippedThenRejected) {
  Image2D t(2, 1.0, 2.0), r(2, 1.0, 1.0);
  std::vector<Image2D> recons{r, r}, truths{t, t}, masks{mask_of(2, {}), mask_of(2, {0})};
  EXPECT_NEAR(mcrc(recons, truths, masks), 0.5, 1e-15);
  std::vector<Image2D> empty{mask_of(2, {}), mask_of(2, {})};
  EXPECT_THROW(mcrc(recons, truths, empty), ConfigError);
}

TEST(Stats, MeanAndSampleStd) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean_of(v), 2.5);
  EXPECT_NEAR(std_of(v), std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one{7.0};
  EXPECT_EQ(std_of(one), 0.0);
}

TEST(Report, AggregatesAndSerializes) {
  MetricsReport report;
  std::vector<std::string> ids{"p0", "p1"};
  const Image2D label0 = random_image(16, 20, 0.1, 1.0), label1 = random_image(16, 21, 0.1, 1.0);
  Image2D rec0 = label0, rec1 = label1;
  for (double& v : rec0.values) v *= 3.0;
  for (double& v : rec1.values) v = v * 2.0 + 0.01;
  std::vector<Image2D> recons{rec0, rec1}, labels{label0, label1};
  std::vector<Image2D> truths{label0, label1};
  std::vector<Image2D> masks{mask_of(16, {0, 1, 2}), mask_of(16, {40})};
  append_method_metrics(report, "osem", "1/10", ids, recons, labels, truths, masks);
  ASSERT_EQ(report.samples.size(), 2u);
  EXPECT_GT(report.samples[0].psnr, 250.0);
  const MethodSummary* s = report.find("osem", "1/10");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->n_samples, 2u);
  EXPECT_NEAR(s->ssim_mean, 0.5 * (report.samples[0].ssim + report.samples[1].ssim), 1e-15);
  const double r1 = (2.0 * label1.values[40] + 0.01) / label1.values[40];
  EXPECT_NEAR(s->mcrc, 0.5 * (3.0 + r1), 1e-12);
  EXPECT_EQ(report.find("osem", "1/4"), nullptr);

  const std::string csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kind,method,count_level,sample,n,psnr,psnr_std,ssim,ssim_std,mcrc");
  EXPECT_NE(csv.find("sample,osem,1/10,p1"), std::string::npos);
  EXPECT_NE(csv.find("aggregate,osem,1/10"), std::string::npos);
  const auto j = report.to_json();
  EXPECT_EQ(j.at("samples").size(), 2u);
  EXPECT_EQ(j.at("summary").at(0).at("method"), "osem");
}

}  // namespace
}  // namespace petrecon
