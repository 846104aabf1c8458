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

#include "petrecon/ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

#include <cblas.h>

#include "petrecon/errors.hpp"

namespace petrecon::ad {

namespace {

void check_finite([[maybe_unused]] const Tensor& t) {
#ifndef NDEBUG
  for (double v : t.data()) assert(std::isfinite(v) && "non-finite value after forward op");
#endif
}

// Row-major C (m x n) = op(A) op(B) + beta C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double* c, double beta) {
  if (m == 0 || n == 0) return;
  const auto mi = static_cast<int>(m), ni = static_cast<int>(n), ki = static_cast<int>(k);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, mi, ni, ki, 1.0,
              a, trans_a ? mi : ki, b, trans_b ? ki : ni, beta, c, ni);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

std::size_t leading(const Shape& s, std::size_t trailing) {
  std::size_t n = 1;
  for (std::size_t i = 0; i + trailing < s.size(); ++i) n *= s[i];
  return n;
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  require_same_shape("elementwise", a, b);
  const std::size_t n = a.numel();
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  switch (kind) {
    case Elementwise::kAdd:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + y[i];
      break;
    case Elementwise::kSub:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - y[i];
      break;
    case Elementwise::kMul:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * y[i];
      break;
  }
  check_finite(out);
  if (Graph::should_record({&a, &b})) {
    Tensor sa = a, sb = b;
    Graph::active()->record(out, {a, b}, [kind, sa, sb](std::span<const double> g, std::span<const std::span<double>> d) {
      const std::size_t n = g.size();
      if (!d[0].empty()) {
        if (kind == Elementwise::kMul) {
          auto y = sb.data();
          for (std::size_t i = 0; i < n; ++i) d[0][i] += g[i] * y[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) d[0][i] += g[i];
        }
      }
      if (!d[1].empty()) {
        if (kind == Elementwise::kMul) {
          auto x = sa.data();
          for (std::size_t i = 0; i < n; ++i) d[1][i] += g[i] * x[i];
        } else if (kind == Elementwise::kSub) {
          for (std::size_t i = 0; i < n; ++i) d[1][i] -= g[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) d[1][i] += g[i];
        }
      }
    });
  }
  return out;
}

Tensor elementwise(Elementwise kind, const Tensor& a, double b) {
  const std::size_t n = a.numel();
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  switch (kind) {
    case Elementwise::kAdd:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + b;
      break;
    case Elementwise::kSub:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - b;
      break;
    case Elementwise::kMul:
      for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * b;
      break;
  }
  check_finite(out);
  if (Graph::should_record({&a})) {
    const double factor = kind == Elementwise::kMul ? b : 1.0;
    Graph::active()->record(out, {a}, [factor](std::span<const double> g, std::span<const std::span<double>> d) {
      for (std::size_t i = 0; i < g.size(); ++i) d[0][i] += g[i] * factor;
    });
  }
  return out;
}

Tensor exp(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = std::exp(v[i]);
  if (Graph::should_record({&x})) {
    Tensor so = out;
    Graph::active()->record(out, {x}, [so](std::span<const double> g, std::span<const std::span<double>> d) {
      auto y = so.data();
      for (std::size_t i = 0; i < g.size(); ++i) d[0][i] += g[i] * y[i];
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() != a.rank()) {
    throw ShapeError("matmul: incompatible ranks " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t r = a.rank();
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw ShapeError("matmul: batch dims differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
  }
  const std::size_t m = a.dim(r - 2), k = a.dim(r - 1), n = b.dim(r - 1);
  if (b.dim(r - 2) != k) {
    throw ShapeError("matmul: inner dims differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t batch = leading(a.shape(), 2);
  Shape out_shape = a.shape();
  out_shape[r - 1] = n;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t p = 0; p < batch; ++p) {
    const double* A = av.data() + p * m * k;
    const double* B = bv.data() + p * k * n;
    gemm(false, false, m, n, k, A, B, o.data() + p * m * n, 0.0);
  }
  check_finite(out);
  if (Graph::should_record({&a, &b})) {
    Tensor sa = a, sb = b;
    Graph::active()->record(out, {a, b}, [sa, sb, batch, m, k, n](std::span<const double> g,
                                                                 std::span<const std::span<double>> d) {
      auto av = sa.data();
      auto bv = sb.data();
      for (std::size_t p = 0; p < batch; ++p) {
        const double* A = av.data() + p * m * k;
        const double* B = bv.data() + p * k * n;
        const double* G = g.data() + p * m * n;
        // dA = dC B^T, dB = A^T dC
        if (!d[0].empty()) gemm(false, true, m, k, n, G, B, d[0].data() + p * m * k, 1.0);
        if (!d[1].empty()) gemm(true, false, k, n, m, A, G, d[1].data() + p * k * n, 1.0);
      }
    });
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2, got " + shape_string(x.shape()));
  const std::size_t r = x.rank();
  std::vector<std::size_t> axes(r);
  for (std::size_t i = 0; i < r; ++i) axes[i] = i;
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(x, axes);
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax on empty shape");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * n;
    double* y = o.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(in[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
  }
  check_finite(out);
  if (Graph::should_record({&x})) {
    Tensor so = out;
    Graph::active()->record(out, {x}, [so, n, rows](std::span<const double> g, std::span<const std::span<double>> d) {
      auto y = so.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * n;
        const double* gr = g.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
        double* dr = d[0].data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = 0.5 * v[i] * (1.0 + std::erf(v[i] * inv_sqrt2));
  if (Graph::should_record({&x})) {
    Tensor sx = x;
    Graph::active()->record(out, {x}, [sx, inv_sqrt2](std::span<const double> g, std::span<const std::span<double>> d) {
      auto v = sx.data();
      const double inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(v[i] * inv_sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v[i] * v[i]);
        d[0][i] += g[i] * (cdf + v[i] * pdf);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm on empty shape");
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layer_norm: parameters " + shape_string(gamma.shape()) + "/" + shape_string(beta.shape()) +
                     " do not match last dim of " + shape_string(x.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / c;
  Tensor out(x.shape());
  // Normalized values and per-token inverse std are saved for backward.
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto o = out.mutable_data();
  auto v = x.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (in[j] - mu) * is;
      xhat[r * c + j] = h;
      o[r * c + j] = gm[j] * h + bt[j];
    }
  }
  check_finite(out);
  if (Graph::should_record({&x, &gamma, &beta})) {
    Tensor sg = gamma;
    Graph::active()->record(
        out, {x, gamma, beta},
        [sg, xhat = std::move(xhat), inv_std = std::move(inv_std), c, rows](std::span<const double> g,
                                                                           std::span<const std::span<double>> d) {
          auto gm = sg.data();
          std::vector<double> gh(c);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * c;
            const double* hr = xhat.data() + r * c;
            if (!d[1].empty()) {
              for (std::size_t j = 0; j < c; ++j) d[1][j] += gr[j] * hr[j];
            }
            if (!d[2].empty()) {
              for (std::size_t j = 0; j < c; ++j) d[2][j] += gr[j];
            }
            if (!d[0].empty()) {
              double mean_g = 0.0, mean_gh = 0.0;
              for (std::size_t j = 0; j < c; ++j) {
                gh[j] = gr[j] * gm[j];
                mean_g += gh[j];
                mean_gh += gh[j] * hr[j];
              }
              mean_g /= static_cast<double>(c);
              mean_gh /= static_cast<double>(c);
              double* dr = d[0].data() + r * c;
              for (std::size_t j = 0; j < c; ++j) dr[j] += inv_std[r] * (gh[j] - mean_g - hr[j] * mean_gh);
            }
          }
        });
  }
  return out;
}

Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (x.rank() != 3) throw ShapeError("conv2d_same: input must be [C,H,W], got " + shape_string(x.shape()));
  if (kernel.rank() != 4 || kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw ShapeError("conv2d_same: kernel must be [C_out,C_in,3,3], got " + shape_string(kernel.shape()));
  }
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0);
  if (kernel.dim(1) != cin) {
    throw ShapeError("conv2d_same: channel mismatch, input " + shape_string(x.shape()) + " kernel " +
                     shape_string(kernel.shape()));
  }
  if (bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d_same: bias " + shape_string(bias.shape()) + " for " + std::to_string(cout) +
                     " output channels");
  }
  Tensor out(Shape{cout, h, w});
  auto o = out.mutable_data();
  auto in = x.data();
  auto kv = kernel.data();
  auto bv = bias.data();
  const std::size_t plane = h * w;
  for (std::size_t co = 0; co < cout; ++co) {
    double* op = o.data() + co * plane;
    std::fill(op, op + plane, bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* ip = in.data() + ci * plane;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = kv[((co * cin + ci) * 3 + ky) * 3 + kx];
          const int dy = ky - 1, dx = kx - 1;
          const std::size_t y0 = dy < 0 ? 1 : 0, y1 = dy > 0 ? h - 1 : h;
          const std::size_t x0 = dx < 0 ? 1 : 0, x1 = dx > 0 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            double* orow = op + y * w;
            const double* irow = ip + (y + dy) * w + dx;
            for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += wt * irow[xx];
          }
        }
      }
    }
  }
  check_finite(out);
  if (Graph::should_record({&x, &kernel, &bias})) {
    Tensor sx = x, sk = kernel;
    Graph::active()->record(
        out, {x, kernel, bias},
        [sx, sk, cin, cout, h, w](std::span<const double> g, std::span<const std::span<double>> d) {
          auto in = sx.data();
          auto kv = sk.data();
          const std::size_t plane = h * w;
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gp = g.data() + co * plane;
            if (!d[2].empty()) {
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
              d[2][co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* ip = in.data() + ci * plane;
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const std::size_t kidx = ((co * cin + ci) * 3 + ky) * 3 + kx;
                  const int dy = ky - 1, dx = kx - 1;
                  const std::size_t y0 = dy < 0 ? 1 : 0, y1 = dy > 0 ? h - 1 : h;
                  const std::size_t x0 = dx < 0 ? 1 : 0, x1 = dx > 0 ? w - 1 : w;
                  if (!d[1].empty()) {
                    double acc = 0.0;
                    for (std::size_t y = y0; y < y1; ++y) {
                      const double* grow = gp + y * w;
                      const double* irow = ip + (y + dy) * w + dx;
                      for (std::size_t xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
                    }
                    d[1][kidx] += acc;
                  }
                  if (!d[0].empty()) {
                    const double wt = kv[kidx];
                    double* dp = d[0].data() + ci * plane;
                    for (std::size_t y = y0; y < y1; ++y) {
                      const double* grow = gp + y * w;
                      double* drow = dp + (y + dy) * w + dx;
                      for (std::size_t xx = x0; xx < x1; ++xx) drow[xx] += wt * grow[xx];
                    }
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() < 1 || weight.rank() != 2) {
    throw ShapeError("linear: bad ranks " + shape_string(x.shape()) + " x " + shape_string(weight.shape()));
  }
  const std::size_t in = weight.dim(0), outd = weight.dim(1);
  if (x.shape().back() != in || bias.shape() != Shape{outd}) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " weight " + shape_string(weight.shape()) +
                     " bias " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outd;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xv = x.data();
  auto wv = weight.data();
  auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), o.data() + r * outd);
  gemm(false, false, rows, outd, in, xv.data(), wv.data(), o.data(), 1.0);
  check_finite(out);
  if (Graph::should_record({&x, &weight, &bias})) {
    Tensor sx = x, sw = weight;
    Graph::active()->record(out, {x, weight, bias},
                            [sx, sw, rows, in, outd](std::span<const double> g, std::span<const std::span<double>> d) {
                              if (!d[0].empty()) gemm(false, true, rows, in, outd, g.data(), sw.data().data(),
                                                      d[0].data(), 1.0);
                              if (!d[1].empty()) gemm(true, false, in, outd, rows, sx.data().data(), g.data(),
                                                      d[1].data(), 1.0);
                              if (!d[2].empty()) {
                                for (std::size_t r = 0; r < rows; ++r) {
                                  const double* gr = g.data() + r * outd;
                                  for (std::size_t j = 0; j < outd; ++j) d[2][j] += gr[j];
                                }
                              }
                            });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (Graph::should_record({&x})) {
    Graph::active()->record(out, {x}, [](std::span<const double> g, std::span<const std::span<double>> d) {
      for (std::size_t i = 0; i < g.size(); ++i) d[0][i] += g[i];
    });
  }
  return out;
}

Tensor permute(const Tensor& x, std::span<const std::size_t> axes) {
  const std::size_t r = x.rank();
  if (axes.size() != r) throw ShapeError("permute: axes count does not match rank of " + shape_string(x.shape()));
  std::vector<bool> seen(r, false);
  for (auto a : axes) {
    if (a >= r || seen[a]) throw ShapeError("permute: invalid axes for " + shape_string(x.shape()));
    seen[a] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(axes[i]);
  std::vector<std::size_t> in_stride(r);
  std::size_t s = 1;
  for (std::size_t i = r; i-- > 0;) {
    in_stride[i] = s;
    s *= x.dim(i);
  }
  std::vector<std::size_t> index(x.numel());
  std::vector<std::size_t> counter(r, 0);
  for (std::size_t flat = 0; flat < index.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += counter[i] * in_stride[axes[i]];
    index[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++counter[i] < out_shape[i]) break;
      counter[i] = 0;
    }
  }
  return gather(x, std::move(index), std::move(out_shape));
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape) {
  if (shape_numel(out_shape) != index.size()) {
    throw ShapeError("gather: index count does not match output shape " + shape_string(out_shape));
  }
  const std::size_t n = x.numel();
  for (auto i : index) {
    if (i != kGatherZero && i >= n) throw ShapeError("gather: index out of range");
  }
  Tensor out(std::move(out_shape));
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < index.size(); ++i) o[i] = index[i] == kGatherZero ? 0.0 : v[index[i]];
  if (Graph::should_record({&x})) {
    Graph::active()->record(out, {x}, [index = std::move(index)](std::span<const double> g,
                                                                  std::span<const std::span<double>> d) {
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] != kGatherZero) d[0][index[i]] += g[i];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Graph::should_record({&x})) {
    Graph::active()->record(out, {x}, [](std::span<const double> g, std::span<const std::span<double>> d) {
      for (auto& v : d[0]) v += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor masked_mse(const Tensor& pred, const Tensor& target, std::span<const unsigned char> mask) {
  require_same_shape("masked_mse", pred, target);
  if (!mask.empty() && mask.size() != pred.numel()) throw ShapeError("masked_mse: mask size mismatch");
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    const double e = p[i] - t[i];
    acc += e * e;
    ++count;
  }
  if (count == 0) throw ShapeError("masked_mse: mask selects no entries");
  const double inv = 1.0 / static_cast<double>(count);
  Tensor out = Tensor::scalar(acc * inv);
  if (Graph::should_record({&pred, &target})) {
    Tensor sp = pred, st = target;
    std::vector<unsigned char> m(mask.begin(), mask.end());
    Graph::active()->record(out, {pred, target}, [sp, st, m = std::move(m), inv](std::span<const double> g,
                                                                                  std::span<const std::span<double>> d) {
      auto p = sp.data();
      auto t = st.data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (!m.empty() && m[i] == 0) continue;
        const double e = 2.0 * inv * g[0] * (p[i] - t[i]);
        if (!d[0].empty()) d[0][i] += e;
        if (!d[1].empty()) d[1][i] -= e;
      }
    });
  }
  return out;
}

}  // namespace petrecon::ad
