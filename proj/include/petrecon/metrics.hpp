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


#ifndef PETRECON_METRICS_HPP
#define PETRECON_METRICS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "petrecon/image.hpp"

namespace petrecon {

Image2D normalize_max1(const Image2D& x);

/// 10 log10(1 / MSE) for images with data range 1; +inf when identical.
double psnr(const Image2D& ref, const Image2D& test);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean SSIM over every fully contained Gaussian window.
double ssim(const Image2D& ref, const Image2D& test, const SsimParams& params = {});

/// Average over samples of (mean of recon on the lesion mask) / (mean of
/// the true image on the same mask). Samples with empty masks are skipped.
double mcrc(std::span<const Image2D> recons, std::span<const Image2D> truths, std::span<const Image2D> lesion_masks);

struct SampleMetrics {
  std::string method;
  std::string count_level;
  std::string sample_id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MethodSummary {
  std::string method;
  std::string count_level;
  std::size_t n_samples = 0;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  double mcrc = 0.0;
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;
  std::vector<MethodSummary> summary;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  const MethodSummary* find(const std::string& method, const std::string& count_level) const;
};

/// Scores one method at one count level: PSNR and SSIM against the labels
/// after max-1 normalization, MCRC against the true phantoms in raw units.
void append_method_metrics(MetricsReport& report, const std::string& method, const std::string& count_level,
                           std::span<const std::string> sample_ids, std::span<const Image2D> recons,
                           std::span<const Image2D> labels, std::span<const Image2D> truths,
                           std::span<const Image2D> lesion_masks);

// Sample mean and (n - 1) standard deviation; std is 0 for n < 2.
double mean_of(std::span<const double> v);
double std_of(std::span<const double> v);

std::string format_metric(double v, int precision = 4);

}  // namespace petrecon

#endif  // PETRECON_METRICS_HPP
