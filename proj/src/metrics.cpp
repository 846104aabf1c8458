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


#include "petrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

void check_same_shape(const Image2D& a, const Image2D& b, const char* what) {
  if (a.size != b.size || a.values.size() != b.values.size()) {
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.size) + " vs " +
                     std::to_string(b.size) + ")");
  }
}

std::vector<double> gaussian_window(std::size_t n, double sigma) {
  std::vector<double> w(n * n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      w[i * n + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += w[i * n + j];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

Image2D normalize_max1(const Image2D& x) {
  const double m = x.max();
  if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("normalize_max1: image maximum must be positive and finite");
  Image2D out = x;
  for (double& v : out.values) v /= m;
  return out;
}

double psnr(const Image2D& ref, const Image2D& test) {
  check_same_shape(ref, test, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const double d = ref.values[i] - test.values[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ref.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image2D& ref, const Image2D& test, const SsimParams& params) {
  check_same_shape(ref, test, "ssim");
  const std::size_t n = ref.size;
  const std::size_t w = params.window;
  if (w == 0 || n < w) throw ShapeError("ssim: image smaller than the " + std::to_string(w) + "-pixel window");
  const auto weights = gaussian_window(w, params.sigma);
  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);
  const std::size_t m = n - w + 1;
  double total = 0.0;
  for (std::size_t r0 = 0; r0 < m; ++r0) {
    for (std::size_t c0 = 0; c0 < m; ++c0) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double k = weights[i * w + j];
          const double x = ref.at(r0 + i, c0 + j);
          const double y = test.at(r0 + i, c0 + j);
          mx += k * x;
          my += k * y;
          sxx += k * x * x;
          syy += k * y * y;
          sxy += k * x * y;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / static_cast<double>(m * m);
}

double mcrc(std::span<const Image2D> recons, std::span<const Image2D> truths, std::span<const Image2D> lesion_masks) {
  if (recons.size() != truths.size() || recons.size() != lesion_masks.size()) {
    throw ShapeError("mcrc: recon, truth and mask counts differ");
  }
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < recons.size(); ++s) {
    check_same_shape(recons[s], truths[s], "mcrc");
    check_same_shape(recons[s], lesion_masks[s], "mcrc");
    double rec = 0.0, tru = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < recons[s].values.size(); ++i) {
      if (lesion_masks[s].values[i] > 0.5) {
        rec += recons[s].values[i];
        tru += truths[s].values[i];
        ++count;
      }
    }
    if (count == 0 || !(tru > 0.0)) {
      std::cerr << "warning: mcrc skips sample " << s << " without lesion pixels\n";
      continue;
    }
    acc += rec / tru;
    ++used;
  }
  if (used == 0) throw ConfigError("mcrc: no sample has a nonempty lesion mask");
  return acc / static_cast<double>(used);
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string format_metric(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void append_method_metrics(MetricsReport& report, const std::string& method, const std::string& count_level,
                           std::span<const std::string> sample_ids, std::span<const Image2D> recons,
                           std::span<const Image2D> labels, std::span<const Image2D> truths,
                           std::span<const Image2D> lesion_masks) {
  const std::size_t n = recons.size();
  if (sample_ids.size() != n || labels.size() != n || truths.size() != n || lesion_masks.size() != n) {
    throw ShapeError("append_method_metrics: input counts differ");
  }
  if (n == 0) throw ConfigError("append_method_metrics: no samples");
  std::vector<double> ps, ss;
  for (std::size_t s = 0; s < n; ++s) {
    const Image2D ref = normalize_max1(labels[s]);
    const Image2D test = normalize_max1(recons[s]);
    SampleMetrics row{method, count_level, sample_ids[s], psnr(ref, test), ssim(ref, test)};
    ps.push_back(row.psnr);
    ss.push_back(row.ssim);
    report.samples.push_back(std::move(row));
  }
  MethodSummary sum;
  sum.method = method;
  sum.count_level = count_level;
  sum.n_samples = n;
  sum.psnr_mean = mean_of(ps);
  sum.psnr_std = std_of(ps);
  sum.ssim_mean = mean_of(ss);
  sum.ssim_std = std_of(ss);
  sum.mcrc = mcrc(recons, truths, lesion_masks);
  report.summary.push_back(sum);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "kind,method,count_level,sample,n,psnr,psnr_std,ssim,ssim_std,mcrc\n";
  for (const auto& s : samples) {
    out << "sample," << s.method << ',' << s.count_level << ',' << s.sample_id << ",1," << format_metric(s.psnr)
        << ",," << format_metric(s.ssim, 6) << ",,\n";
  }
  for (const auto& m : summary) {
    out << "aggregate," << m.method << ',' << m.count_level << ",," << m.n_samples << ',' << format_metric(m.psnr_mean)
        << ',' << format_metric(m.psnr_std) << ',' << format_metric(m.ssim_mean, 6) << ','
        << format_metric(m.ssim_std, 6) << ',' << format_metric(m.mcrc, 6) << '\n';
  }
  return out.str();
}

nlohmann::json MetricsReport::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_metric(v);
  };
  nlohmann::json j;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"method", s.method},
                            {"count_level", s.count_level},
                            {"sample", s.sample_id},
                            {"psnr", num(s.psnr)},
                            {"ssim", num(s.ssim)}});
  }
  j["summary"] = nlohmann::json::array();
  for (const auto& m : summary) {
    j["summary"].push_back({{"method", m.method},
                            {"count_level", m.count_level},
                            {"n", m.n_samples},
                            {"psnr", format_metric(m.psnr_mean, 2) + "±" + format_metric(m.psnr_std, 2)},
                            {"ssim", format_metric(m.ssim_mean, 4) + "±" + format_metric(m.ssim_std, 4)},
                            {"psnr_mean", num(m.psnr_mean)},
                            {"psnr_std", num(m.psnr_std)},
                            {"ssim_mean", num(m.ssim_mean)},
                            {"ssim_std", num(m.ssim_std)},
                            {"mcrc", num(m.mcrc)}});
  }
  return j;
}

const MethodSummary* MetricsReport::find(const std::string& method, const std::string& count_level) const {
  for (const auto& m : summary) {
    if (m.method == method && m.count_level == count_level) return &m;
  }
  return nullptr;
}

}  // namespace petrecon
