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


#include "petrecon/adam.hpp"

#include <cmath>

#include "petrecon/errors.hpp"

namespace petrecon {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, const AdamConfig& config,
               std::size_t t) {
  if (t < 1) throw ConfigError("Adam step count starts at 1");
  if (param.size() != grad.size()) throw ShapeError("adam_step: parameter and gradient sizes differ");
  if (moments.m.empty() && moments.v.empty()) {
    moments.m.assign(param.size(), 0.0);
    moments.v.assign(param.size(), 0.0);
  }
  if (moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw ShapeError("adam_step: moment buffers do not match the parameter");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    moments.m[i] = config.beta1 * moments.m[i] + (1.0 - config.beta1) * grad[i];
    moments.v[i] = config.beta2 * moments.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    param[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

Adam::Adam(std::vector<nn::NamedTensor> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {
  config_.validate();
}

void Adam::step() {
  ++t_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Tensor& p = params_[k].tensor;
    const std::vector<double> g = p.grad();
    adam_step(p.mutable_data(), g, moments_[k], config_, t_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace petrecon
