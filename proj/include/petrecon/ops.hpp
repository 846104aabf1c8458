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

#ifndef PETRECON_OPS_HPP
#define PETRECON_OPS_HPP

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "petrecon/tensor.hpp"

// Differentiable tensor operations. Shapes must agree exactly; the only
// broadcasting supported is a scalar (double) second operand.
namespace petrecon::ad {

enum class Elementwise { kAdd, kSub, kMul };

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b);
Tensor elementwise(Elementwise kind, const Tensor& a, double b);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kMul, a, b); }
inline Tensor add(const Tensor& a, double b) { return elementwise(Elementwise::kAdd, a, b); }
inline Tensor mul(const Tensor& a, double b) { return elementwise(Elementwise::kMul, a, b); }
inline Tensor scale(const Tensor& a, double c) { return elementwise(Elementwise::kMul, a, c); }

Tensor exp(const Tensor& x);

/// Batched product of [..., m, k] and [..., k, n]; leading dims must match.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the two trailing dimensions.
Tensor transpose_last2(const Tensor& x);

/// Softmax over the last dimension, max-subtracted.
Tensor softmax_lastdim(const Tensor& x);

/// Exact GELU, x * Phi(x) with Phi from erf.
Tensor gelu(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;

/// Per-token standardization over the last dimension followed by the affine
/// map gamma * xhat + beta. Variance is the biased estimate.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

/// 3x3 cross-correlation, stride 1, zero padding 1.
/// x: [C_in, H, W], kernel: [C_out, C_in, 3, 3], bias: [C_out].
Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias);

/// x: [..., in], weight: [in, out], bias: [out] -> [..., out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::span<const std::size_t> axes);

inline constexpr std::size_t kGatherZero = std::numeric_limits<std::size_t>::max();

/// out[i] = x[index[i]], or 0 where index[i] == kGatherZero. Backward
/// scatter-adds, so repeated indices are allowed.
Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of (pred - target)^2 over entries where mask is nonzero. An empty
/// mask selects every entry.
Tensor masked_mse(const Tensor& pred, const Tensor& target, std::span<const unsigned char> mask = {});

}  // namespace petrecon::ad

#endif  // PETRECON_OPS_HPP
