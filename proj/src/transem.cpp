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

#include "petrecon/transem.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "petrecon/binary_io.hpp"
#include "petrecon/errors.hpp"

namespace petrecon {

namespace {

struct FusedPixel {
  double x;
  // Partial derivatives with respect to x_em, r and a = alpha * s.
  double d_em, d_r, d_a;
};

// Positive root of x^2 + (a - r) x - a e = 0, evaluated in the branch that
// avoids cancellation. With a = +inf this returns e exactly.
FusedPixel fuse(double e, double r, double a) {
  const double c = 1.0 - r / a;
  const double root = std::sqrt(c * c + 4.0 * e / a);
  FusedPixel p;
  p.x = c >= 0.0 ? 2.0 * e / (c + root) : 0.5 * a * (root - c);
  if (std::isinf(a)) {
    p.d_em = 1.0;
    p.d_r = 0.0;
    p.d_a = 0.0;
    return p;
  }
  // Implicit differentiation; the derivative of the quadratic in x is
  // 2x + a - r = a * root.
  const double denom = std::max(a * root, std::numeric_limits<double>::min());
  p.d_em = a / denom;
  p.d_r = p.x / denom;
  p.d_a = (e - p.x) / denom;
  return p;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("fusion step size alpha must be > 0");
}

}  // namespace

void TransEMConfig::validate() const {
  if (n_iterations < 1 || n_subsets < 1) throw ConfigError("TransEM needs at least one block");
  if (!(alpha_init > 0.0)) throw ConfigError("alpha_init must be > 0");
  if (!(epsilon_em > 0.0)) throw ConfigError("epsilon_em must be > 0");
}

nlohmann::json to_json(const TransEMConfig& c) {
  return {{"n_iterations", c.n_iterations}, {"n_subsets", c.n_subsets},   {"shared", c.shared},
          {"alpha_init", c.alpha_init},     {"infinite_alpha", c.infinite_alpha}, {"epsilon_em", c.epsilon_em},
          {"regularizer", c.regularizer}};
}

TransEMConfig transem_config_from_json(const nlohmann::json& j) {
  TransEMConfig c;
  try {
    c.n_iterations = j.at("n_iterations").get<std::size_t>();
    c.n_subsets = j.at("n_subsets").get<std::size_t>();
    c.shared = j.value("shared", c.shared);
    c.alpha_init = j.value("alpha_init", c.alpha_init);
    c.infinite_alpha = j.value("infinite_alpha", c.infinite_alpha);
    c.epsilon_em = j.value("epsilon_em", c.epsilon_em);
    c.regularizer = j.value("regularizer", c.regularizer);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid TransEM config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> fusion_update(std::span<const double> x_em, std::span<const double> r, double alpha,
                                  std::span<const double> sensitivity) {
  check_alpha(alpha);
  if (x_em.size() != r.size() || x_em.size() != sensitivity.size()) throw ShapeError("fusion_update: size mismatch");
  std::vector<double> out(x_em.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double s = sensitivity[j];
    if (s < 0.0 || !std::isfinite(s)) throw ConfigError("fusion_update: sensitivity must be finite and >= 0");
    if (x_em[j] < 0.0) throw ConfigError("fusion_update: x_em must be >= 0");
    out[j] = s > 0.0 ? fuse(x_em[j], r[j], alpha * s).x : x_em[j];
  }
  return out;
}

Image2D fusion_update(const Image2D& x_em, const Image2D& r, double alpha, const Image2D& sensitivity) {
  Image2D out(x_em.size, x_em.pixel_size);
  out.values = fusion_update(x_em.values, r.values, alpha, sensitivity.values);
  return out;
}

SubsetPlan::SubsetPlan(const SystemModel& model, std::size_t n_subsets)
    : model_(&model), subsets_(make_subsets(model.geometry().n_angles, n_subsets)) {
  sens_.reserve(subsets_.size());
  for (const auto& s : subsets_) sens_.push_back(model.subset_sensitivity(s));
}

ad::Tensor em_update_op(const ad::Tensor& x_prev, const Sinogram& y, const Sinogram& b, const SubsetPlan& plan,
                        std::size_t subset, double epsilon_em) {
  const SystemModel& model = plan.model();
  const std::size_t n = model.geometry().image_size;
  if (x_prev.shape() != ad::Shape{1, n, n}) {
    throw ShapeError("em_update_op: image " + ad::shape_string(x_prev.shape()) + " does not match geometry");
  }
  const auto& angles = plan.angles(subset);
  const auto sens = plan.sensitivity(subset);
  EmStep step = em_step(model, angles, sens, x_prev.data(), y, b, epsilon_em);
  ad::Tensor out({1, n, n}, std::move(step.x_em));
  if (ad::Graph::should_record({&x_prev})) {
    ad::Tensor saved_x = x_prev;
    ad::Graph::active()->record(
        out, {x_prev},
        [&plan, subset, saved_x, y_values = y.values, expected = std::move(step.expected),
         bp = std::move(step.backprojected_ratio), epsilon_em](std::span<const double> g,
                                                               std::span<const std::span<double>> d) {
          const SystemModel& model = plan.model();
          const auto& angles = plan.angles(subset);
          const auto sens = plan.sensitivity(subset);
          const auto& seen = model.mask();
          auto x = saved_x.data();
          const std::size_t n_pix = x.size();
          std::vector<double> u(n_pix, 0.0);
          for (std::size_t j = 0; j < n_pix; ++j) {
            if (sens[j] > 0.0) {
              d[0][j] += g[j] * bp[j] / sens[j];
              u[j] = g[j] * x[j] / sens[j];
            } else if (seen[j]) {
              d[0][j] += g[j];
            }
          }
          std::vector<double> au(expected.size(), 0.0);
          model.forward(u, au, angles);
          // d(y/p)/dp = -y/p^2 above the floor, 0 below it.
          std::vector<double> w(expected.size(), 0.0);
          const std::size_t n_bins = model.geometry().n_bins;
          for (std::size_t a : angles) {
            for (std::size_t k = 0; k < n_bins; ++k) {
              const std::size_t i = a * n_bins + k;
              const double p = expected[i];
              if (p > epsilon_em) w[i] = -au[i] * y_values[i] / (p * p);
            }
          }
          std::vector<double> back(n_pix, 0.0);
          model.back(w, back, angles);
          for (std::size_t j = 0; j < n_pix; ++j) d[0][j] += back[j];
        });
  }
  return out;
}

ad::Tensor fusion_op(const ad::Tensor& x_em, const ad::Tensor& r, const ad::Tensor& log_alpha,
                     std::span<const double> sensitivity, bool infinite_alpha) {
  if (x_em.shape() != r.shape() || x_em.numel() != sensitivity.size()) {
    throw ShapeError("fusion_op: shape mismatch " + ad::shape_string(x_em.shape()) + " vs " +
                     ad::shape_string(r.shape()));
  }
  if (log_alpha.numel() != 1) throw ShapeError("fusion_op: log_alpha must be a scalar");
  const double alpha = infinite_alpha ? std::numeric_limits<double>::infinity() : std::exp(log_alpha.item());
  check_alpha(alpha);
  const std::size_t n = x_em.numel();
  ad::Tensor out(x_em.shape());
  auto o = out.mutable_data();
  auto e = x_em.data();
  auto rv = r.data();
  std::vector<double> d_em(n, 1.0), d_r(n, 0.0), d_a(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = sensitivity[j];
    if (!(s > 0.0)) {
      o[j] = e[j];
      continue;
    }
    const double a = alpha * s;
    const FusedPixel p = fuse(e[j], rv[j], a);
    o[j] = p.x;
    d_em[j] = p.d_em;
    d_r[j] = p.d_r;
    // d/dlog(alpha) = a * d/da.
    d_a[j] = std::isinf(a) ? 0.0 : a * p.d_a;
  }
  if (ad::Graph::should_record({&x_em, &r, &log_alpha})) {
    ad::Graph::active()->record(
        out, {x_em, r, log_alpha},
        [d_em = std::move(d_em), d_r = std::move(d_r), d_a = std::move(d_a)](std::span<const double> g,
                                                                              std::span<const std::span<double>> d) {
          if (!d[0].empty()) {
            for (std::size_t j = 0; j < g.size(); ++j) d[0][j] += g[j] * d_em[j];
          }
          if (!d[1].empty()) {
            for (std::size_t j = 0; j < g.size(); ++j) d[1][j] += g[j] * d_r[j];
          }
          if (!d[2].empty()) {
            double acc = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) acc += g[j] * d_a[j];
            d[2][0] += acc;
          }
        });
  }
  return out;
}

TransEMModel::TransEMModel(TransEMConfig config, std::uint64_t seed, bool zero_init_outputs)
    : config_(std::move(config)) {
  config_.validate();
  CounterRng rng(seed);
  const std::size_t n_reg = config_.shared ? 1 : config_.n_blocks();
  for (std::size_t k = 0; k < n_reg; ++k) {
    CounterRng stream = rng.split(k);
    regularizers_.push_back(nn::make_regularizer(config_.regularizer, stream, zero_init_outputs));
  }
  for (std::size_t k = 0; k < config_.n_blocks(); ++k) {
    log_alpha_.push_back(ad::Tensor::scalar(std::log(config_.alpha_init)));
    log_alpha_.back().requires_grad(true);
  }
}

nn::Regularizer& TransEMModel::regularizer(std::size_t block) {
  return *regularizers_[config_.shared ? 0 : block];
}

const nn::Regularizer& TransEMModel::regularizer(std::size_t block) const {
  return *regularizers_[config_.shared ? 0 : block];
}

double TransEMModel::alpha(std::size_t block) const { return std::exp(log_alpha_[block].item()); }

std::vector<nn::NamedTensor> TransEMModel::parameters() {
  std::vector<nn::NamedTensor> out;
  for (std::size_t k = 0; k < regularizers_.size(); ++k) {
    const std::string prefix = config_.shared ? "reg." : "reg" + std::to_string(k) + ".";
    for (auto& p : regularizers_[k]->parameters()) out.push_back({prefix + p.name, p.tensor});
  }
  for (std::size_t k = 0; k < log_alpha_.size(); ++k) {
    out.push_back({"log_alpha." + std::to_string(k), log_alpha_[k]});
  }
  return out;
}

void TransEMModel::save(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string json = to_json(config_).dump();
  binio::write_magic(out, "TEM1");
  binio::write_u64(out, json.size());
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  binio::write_u32(out, static_cast<std::uint32_t>(regularizers_.size()));
  for (auto& reg : regularizers_) nn::save_parameters(out, reg->parameters());
  binio::write_u64(out, log_alpha_.size());
  for (const auto& la : log_alpha_) binio::write_f64(out, la.item());
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

TransEMModel TransEMModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open checkpoint " + path);
  binio::expect_magic(in, "TEM1", path);
  const std::uint64_t len = binio::read_u64(in);
  if (len > (1u << 24)) throw IoError(path + ": config block too large");
  std::string json(len, '\0');
  if (!in.read(json.data(), static_cast<std::streamsize>(len))) throw IoError(path + ": truncated config block");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": bad config block: " + e.what());
  }
  TransEMModel model(transem_config_from_json(j), 0);
  const std::uint32_t n_reg = binio::read_u32(in);
  if (n_reg != model.regularizers_.size()) throw IoError(path + ": regularizer count mismatch");
  for (auto& reg : model.regularizers_) {
    auto params = reg->parameters();
    nn::load_parameters(in, params);
  }
  const std::uint64_t n_alpha = binio::read_u64(in);
  if (n_alpha != model.log_alpha_.size()) throw IoError(path + ": log_alpha count mismatch");
  for (auto& la : model.log_alpha_) la.mutable_data()[0] = binio::read_f64(in);
  return model;
}

ad::Tensor transem_block(const ad::Tensor& x_prev, const Sinogram& y, const Sinogram& b, const SubsetPlan& plan,
                         std::size_t block, TransEMModel& model) {
  if (plan.size() != model.config().n_subsets) throw ConfigError("subset plan does not match model config");
  const std::size_t subset = block % plan.size();
  const ad::Tensor x_em = em_update_op(x_prev, y, b, plan, subset, model.config().epsilon_em);
  const ad::Tensor r = model.regularizer(block).forward(x_prev);
  return fusion_op(x_em, r, model.log_alpha(block), plan.sensitivity(subset), model.config().infinite_alpha);
}

ad::Tensor reconstruct_tensor(const Sinogram& y, const Sinogram& b, const SubsetPlan& plan, TransEMModel& model) {
  ad::Tensor x = image_to_tensor(initial_image(plan.model()));
  for (std::size_t k = 0; k < model.n_blocks(); ++k) x = transem_block(x, y, b, plan, k, model);
  return x;
}

Image2D reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& system, TransEMModel& model) {
  const SubsetPlan plan(system, model.config().n_subsets);
  return tensor_to_image(reconstruct_tensor(y, b, plan, model), system.geometry().pixel_size);
}

ad::Tensor image_to_tensor(const Image2D& image) {
  return ad::Tensor({1, image.size, image.size}, image.values);
}

Image2D tensor_to_image(const ad::Tensor& t, double pixel_size) {
  if (t.rank() != 3 || t.dim(0) != 1 || t.dim(1) != t.dim(2)) {
    throw ShapeError("tensor_to_image: expected [1,N,N], got " + ad::shape_string(t.shape()));
  }
  Image2D img(t.dim(1), pixel_size);
  img.values.assign(t.data().begin(), t.data().end());
  return img;
}

}  // namespace petrecon
