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

#ifndef PETRECON_RSTR_HPP
#define PETRECON_RSTR_HPP

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "petrecon/ops.hpp"
#include "petrecon/rng.hpp"
#include "petrecon/tensor.hpp"

// Image-domain regularizer networks: the residual swin-transformer
// regularizer (conv -> windowed transformer layer -> conv, outer residual)
// and a plain residual CNN used as the ablation baseline.
namespace petrecon::nn {

using ad::Tensor;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Conv3x3 {
  Tensor kernel;  // [out, in, 3, 3]
  Tensor bias;    // [out]
  Tensor forward(const Tensor& x) const { return ad::conv2d_same(x, kernel, bias); }
};

struct LinearLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  Tensor forward(const Tensor& x) const { return ad::linear(x, weight, bias); }
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor forward(const Tensor& x) const { return ad::layer_norm(x, gamma, beta); }
};

struct StlConfig {
  std::size_t embed_dim = 32;
  std::size_t window = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
  // Cyclic shift of window/2 before partitioning.
  bool shift = false;

  std::size_t head_dim() const { return embed_dim / heads; }
  void validate() const;
};

struct StlParams {
  StlConfig config;
  LayerNormParams norm1;
  LinearLayer query, key, value;
  LinearLayer proj;
  LayerNormParams norm2;
  LinearLayer fc1, fc2;
};

/// Padding and shift used to split a [C, H, W] map into M x M windows.
/// Padding is symmetric zero padding up to the next multiple of M.
struct WindowLayout {
  std::size_t channels = 0, height = 0, width = 0, window = 1;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t padded_height = 0, padded_width = 0;
  std::size_t shift = 0;

  static WindowLayout make(std::size_t channels, std::size_t height, std::size_t width, std::size_t window,
                           bool shifted);
  std::size_t windows_y() const { return padded_height / window; }
  std::size_t windows_x() const { return padded_width / window; }
  std::size_t num_windows() const { return windows_y() * windows_x(); }
  std::size_t tokens_per_window() const { return window * window; }
};

/// [C, H, W] -> [n_windows, M*M, C]. Windows are ordered row-major over the
/// padded map, tokens row-major within a window.
Tensor window_partition(const Tensor& x, const WindowLayout& layout);
/// Inverse of window_partition; padding is cropped.
Tensor window_merge(const Tensor& tokens, const WindowLayout& layout);

/// Multi-head softmax(Q K^T / sqrt(d)) V inside each window, heads
/// concatenated and output-projected. tokens: [n_windows, T, C].
Tensor window_msa(const Tensor& tokens, const StlParams& params);

/// partition -> LN -> MSA -> +residual -> LN -> MLP(GELU) -> +residual -> merge.
Tensor stl_forward(const Tensor& x, const StlParams& params);

struct RstrConfig {
  StlConfig stl;
  bool outer_residual = true;
};

struct RstrParams {
  RstrConfig config;
  Conv3x3 conv_in;  // 1 -> C
  StlParams stl;
  Conv3x3 conv_out;  // C -> 1
};

/// conv_in -> stl -> conv_out, plus the module input when outer_residual.
/// x: [1, H, W].
Tensor rstr_forward(const Tensor& x, const RstrParams& params);

struct ResidualCnnConfig {
  std::size_t channels = 32;
};

struct ResidualCnnParams {
  ResidualCnnConfig config;
  Conv3x3 conv1, conv2, conv3;
};

/// conv(1->C) -> GELU -> conv(C->C) -> GELU -> conv(C->1), plus the input.
Tensor residual_cnn_forward(const Tensor& x, const ResidualCnnParams& params);

/// Initializes weights uniformly in +-1/sqrt(fan_in) and biases to zero.
/// With zero_init_outputs the attention output projection, the second MLP
/// layer, and conv_out are zero, which makes rstr_forward the identity.
RstrParams init_rstr(const RstrConfig& config, CounterRng& rng, bool zero_init_outputs = true);
ResidualCnnParams init_residual_cnn(const ResidualCnnConfig& config, CounterRng& rng,
                                    bool zero_init_outputs = true);

std::vector<NamedTensor> named_parameters(RstrParams& params);
std::vector<NamedTensor> named_parameters(ResidualCnnParams& params);

/// Image-to-image regularizer with a named parameter list.
class Regularizer {
 public:
  virtual ~Regularizer() = default;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual std::vector<NamedTensor> parameters() = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json config_json() const = 0;
};

class RstrRegularizer : public Regularizer {
 public:
  explicit RstrRegularizer(RstrParams params) : params_(std::move(params)) {}
  Tensor forward(const Tensor& x) const override { return rstr_forward(x, params_); }
  std::vector<NamedTensor> parameters() override { return named_parameters(params_); }
  std::string kind() const override { return "rstr"; }
  nlohmann::json config_json() const override;
  RstrParams& params() { return params_; }

 private:
  RstrParams params_;
};

class ResidualCnnRegularizer : public Regularizer {
 public:
  explicit ResidualCnnRegularizer(ResidualCnnParams params) : params_(std::move(params)) {}
  Tensor forward(const Tensor& x) const override { return residual_cnn_forward(x, params_); }
  std::vector<NamedTensor> parameters() override { return named_parameters(params_); }
  std::string kind() const override { return "cnn"; }
  nlohmann::json config_json() const override;

 private:
  ResidualCnnParams params_;
};

/// Builds a regularizer from {"kind": "rstr"|"cnn", ...} as produced by
/// config_json().
std::unique_ptr<Regularizer> make_regularizer(const nlohmann::json& config, CounterRng& rng,
                                              bool zero_init_outputs = true);

RstrConfig rstr_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RstrConfig& config);
nlohmann::json to_json(const ResidualCnnConfig& config);

/// Writes the parameter container ("RSTR" records) for a parameter list.
void save_parameters(std::ostream& out, const std::vector<NamedTensor>& params);
/// Reads a container and copies it into `params`, matching names and shapes
/// exactly.
void load_parameters(std::istream& in, std::vector<NamedTensor>& params);

}  // namespace petrecon::nn

#endif  // PETRECON_RSTR_HPP
