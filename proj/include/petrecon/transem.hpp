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

#ifndef PETRECON_TRANSEM_HPP
#define PETRECON_TRANSEM_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "petrecon/classic_recon.hpp"
#include "petrecon/image.hpp"
#include "petrecon/rstr.hpp"
#include "petrecon/system_model.hpp"
#include "petrecon/tensor.hpp"

namespace petrecon {

struct TransEMConfig {
  std::size_t n_iterations = 10;
  std::size_t n_subsets = 6;
  // One regularizer shared by every block, or one per block.
  bool shared = true;
  double alpha_init = 1.0;
  // Test hook: alpha = +inf, which reduces every fusion to the EM estimate.
  bool infinite_alpha = false;
  double epsilon_em = kDefaultEmEpsilon;
  // Regularizer description, see nn::make_regularizer.
  nlohmann::json regularizer = nn::to_json(nn::RstrConfig{});

  std::size_t n_blocks() const { return n_iterations * n_subsets; }
  void validate() const;
};

nlohmann::json to_json(const TransEMConfig& config);
TransEMConfig transem_config_from_json(const nlohmann::json& j);

/// Per-pixel closed-form fusion of the EM estimate with the regularized
/// reference r: the positive root of x^2/(a) + (1 - r/a) x - x_em = 0 with
/// a = alpha * s_j. Pixels with s_j <= 0 pass x_em through.
std::vector<double> fusion_update(std::span<const double> x_em, std::span<const double> r, double alpha,
                                  std::span<const double> sensitivity);
Image2D fusion_update(const Image2D& x_em, const Image2D& r, double alpha, const Image2D& sensitivity);

/// Precomputed subsets and subset sensitivities for one system model. The
/// model must outlive the context and any graph built with it.
class SubsetPlan {
 public:
  SubsetPlan(const SystemModel& model, std::size_t n_subsets);
  const SystemModel& model() const { return *model_; }
  std::size_t size() const { return subsets_.size(); }
  const AngleSubset& angles(std::size_t k) const { return subsets_[k]; }
  std::span<const double> sensitivity(std::size_t k) const { return sens_[k]; }

 private:
  const SystemModel* model_;
  std::vector<AngleSubset> subsets_;
  std::vector<std::vector<double>> sens_;
};

/// Differentiable subset EM update of x_prev ([1, H, W]). Gradients flow
/// through the ratio y / ybar as well as the multiplicative factor.
ad::Tensor em_update_op(const ad::Tensor& x_prev, const Sinogram& y, const Sinogram& b, const SubsetPlan& plan,
                        std::size_t subset, double epsilon_em = kDefaultEmEpsilon);

/// Differentiable fusion with alpha = exp(log_alpha); log_alpha is [1].
ad::Tensor fusion_op(const ad::Tensor& x_em, const ad::Tensor& r, const ad::Tensor& log_alpha,
                     std::span<const double> sensitivity, bool infinite_alpha = false);

/// Unrolled reconstructor parameters: regularizer(s) plus per-block
/// log step sizes.
class TransEMModel {
 public:
  TransEMModel(TransEMConfig config, std::uint64_t seed, bool zero_init_outputs = true);

  const TransEMConfig& config() const { return config_; }
  std::size_t n_blocks() const { return config_.n_blocks(); }
  nn::Regularizer& regularizer(std::size_t block);
  const nn::Regularizer& regularizer(std::size_t block) const;
  std::size_t num_regularizers() const { return regularizers_.size(); }
  const ad::Tensor& log_alpha(std::size_t block) const { return log_alpha_[block]; }
  double alpha(std::size_t block) const;

  /// Every trainable tensor, regularizers first then log_alpha, with stable
  /// names.
  std::vector<nn::NamedTensor> parameters();

  // TEM1: "TEM1", u64 json length, config JSON, u32 regularizer count,
  // one parameter container per regularizer, u64 block count, f64 log_alpha.
  void save(const std::string& path);
  static TransEMModel load(const std::string& path);

 private:
  TransEMConfig config_;
  std::vector<std::unique_ptr<nn::Regularizer>> regularizers_;
  std::vector<ad::Tensor> log_alpha_;
};

/// One block: x_em = subset EM(x_prev), r = regularizer(x_prev), fusion.
ad::Tensor transem_block(const ad::Tensor& x_prev, const Sinogram& y, const Sinogram& b, const SubsetPlan& plan,
                         std::size_t block, TransEMModel& model);

/// Full unrolled pass from the all-ones image; differentiable when a Graph
/// is active. Returns [1, H, W].
ad::Tensor reconstruct_tensor(const Sinogram& y, const Sinogram& b, const SubsetPlan& plan, TransEMModel& model);

Image2D reconstruct(const Sinogram& y, const Sinogram& b, const SystemModel& system, TransEMModel& model);

ad::Tensor image_to_tensor(const Image2D& image);
Image2D tensor_to_image(const ad::Tensor& t, double pixel_size);

}  // namespace petrecon

#endif  // PETRECON_TRANSEM_HPP
