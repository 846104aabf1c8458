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


#ifndef PETRECON_ADAM_HPP
#define PETRECON_ADAM_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "petrecon/rstr.hpp"

namespace petrecon {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update of `param` in place. `t` is the 1-based
/// step count; moments are resized on first use.
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, const AdamConfig& config,
               std::size_t t);

/// Adam over a fixed list of named tensors, reading their accumulated
/// gradients.
class Adam {
 public:
  Adam(std::vector<nn::NamedTensor> params, AdamConfig config);

  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<nn::NamedTensor> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

}  // namespace petrecon

#endif  // PETRECON_ADAM_HPP
