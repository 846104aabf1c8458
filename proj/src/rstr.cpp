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

#include "petrecon/rstr.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "petrecon/binary_io.hpp"
#include "petrecon/errors.hpp"

namespace petrecon::nn {

namespace {

Tensor uniform_tensor(ad::Shape shape, double bound, CounterRng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  return t;
}

Conv3x3 make_conv(std::size_t in, std::size_t out, CounterRng& rng, bool zero) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
  Conv3x3 c;
  c.kernel = zero ? Tensor({out, in, 3, 3}) : uniform_tensor({out, in, 3, 3}, bound, rng);
  c.bias = Tensor({out});
  return c;
}

LinearLayer make_linear(std::size_t in, std::size_t out, CounterRng& rng, bool zero) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearLayer l;
  l.weight = zero ? Tensor({in, out}) : uniform_tensor({in, out}, bound, rng);
  l.bias = Tensor({out});
  return l;
}

LayerNormParams make_norm(std::size_t c) { return {Tensor({c}, 1.0), Tensor({c}, 0.0)}; }

void require_grad(std::vector<NamedTensor>& params) {
  for (auto& p : params) p.tensor.requires_grad(true);
}

void push(std::vector<NamedTensor>& out, const std::string& prefix, Conv3x3& c) {
  out.push_back({prefix + ".kernel", c.kernel});
  out.push_back({prefix + ".bias", c.bias});
}

void push(std::vector<NamedTensor>& out, const std::string& prefix, LinearLayer& l) {
  out.push_back({prefix + ".weight", l.weight});
  out.push_back({prefix + ".bias", l.bias});
}

void push(std::vector<NamedTensor>& out, const std::string& prefix, LayerNormParams& n) {
  out.push_back({prefix + ".gamma", n.gamma});
  out.push_back({prefix + ".beta", n.beta});
}

// [n, T, C] -> [n, heads, T, d]
Tensor split_heads(const Tensor& t, std::size_t heads) {
  const std::size_t n = t.dim(0), tokens = t.dim(1), c = t.dim(2);
  const std::size_t axes[4] = {0, 2, 1, 3};
  return ad::permute(ad::reshape(t, {n, tokens, heads, c / heads}), axes);
}

}  // namespace

void StlConfig::validate() const {
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("embed_dim must be a positive multiple of heads");
  }
  if (window == 0) throw ConfigError("window size must be >= 1");
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be >= 1");
}

WindowLayout WindowLayout::make(std::size_t channels, std::size_t height, std::size_t width, std::size_t window,
                                bool shifted) {
  if (window == 0) throw ConfigError("window size must be >= 1");
  WindowLayout l;
  l.channels = channels;
  l.height = height;
  l.width = width;
  l.window = window;
  const std::size_t pad_h = (window - height % window) % window;
  const std::size_t pad_w = (window - width % window) % window;
  l.pad_top = pad_h / 2;
  l.pad_left = pad_w / 2;
  l.padded_height = height + pad_h;
  l.padded_width = width + pad_w;
  l.shift = shifted ? window / 2 : 0;
  return l;
}

Tensor window_partition(const Tensor& x, const WindowLayout& l) {
  if (x.shape() != ad::Shape{l.channels, l.height, l.width}) {
    throw ShapeError("window_partition: input " + ad::shape_string(x.shape()) + " does not match layout");
  }
  const std::size_t m = l.window, tokens = l.tokens_per_window(), c = l.channels;
  const std::size_t nwx = l.windows_x();
  std::vector<std::size_t> index(l.num_windows() * tokens * c);
  std::size_t k = 0;
  for (std::size_t w = 0; w < l.num_windows(); ++w) {
    const std::size_t wy = w / nwx, wx = w % nwx;
    for (std::size_t p = 0; p < tokens; ++p) {
      const std::size_t ys = (wy * m + p / m + l.shift) % l.padded_height;
      const std::size_t xs = (wx * m + p % m + l.shift) % l.padded_width;
      const bool inside = ys >= l.pad_top && ys < l.pad_top + l.height && xs >= l.pad_left &&
                          xs < l.pad_left + l.width;
      const std::size_t base = inside ? (ys - l.pad_top) * l.width + (xs - l.pad_left) : 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        index[k++] = inside ? ch * l.height * l.width + base : ad::kGatherZero;
      }
    }
  }
  return ad::gather(x, std::move(index), {l.num_windows(), tokens, c});
}

Tensor window_merge(const Tensor& tokens, const WindowLayout& l) {
  if (tokens.shape() != ad::Shape{l.num_windows(), l.tokens_per_window(), l.channels}) {
    throw ShapeError("window_merge: tokens " + ad::shape_string(tokens.shape()) + " do not match layout");
  }
  const std::size_t m = l.window, c = l.channels, nwx = l.windows_x();
  std::vector<std::size_t> index(c * l.height * l.width);
  for (std::size_t y = 0; y < l.height; ++y) {
    for (std::size_t x = 0; x < l.width; ++x) {
      const std::size_t yr = (y + l.pad_top + l.padded_height - l.shift) % l.padded_height;
      const std::size_t xr = (x + l.pad_left + l.padded_width - l.shift) % l.padded_width;
      const std::size_t w = (yr / m) * nwx + xr / m;
      const std::size_t p = (yr % m) * m + xr % m;
      const std::size_t src = (w * l.tokens_per_window() + p) * c;
      for (std::size_t ch = 0; ch < c; ++ch) index[ch * l.height * l.width + y * l.width + x] = src + ch;
    }
  }
  return ad::gather(tokens, std::move(index), {c, l.height, l.width});
}

Tensor window_msa(const Tensor& tokens, const StlParams& params) {
  const auto& cfg = params.config;
  if (tokens.rank() != 3 || tokens.dim(2) != cfg.embed_dim) {
    throw ShapeError("window_msa: tokens " + ad::shape_string(tokens.shape()) + " for embed_dim " +
                     std::to_string(cfg.embed_dim));
  }
  const std::size_t n = tokens.dim(0), t = tokens.dim(1), c = cfg.embed_dim;
  const Tensor q = split_heads(params.query.forward(tokens), cfg.heads);
  const Tensor k = split_heads(params.key.forward(tokens), cfg.heads);
  const Tensor v = split_heads(params.value.forward(tokens), cfg.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  const Tensor scores = ad::scale(ad::matmul(q, ad::transpose_last2(k)), scale);
  const Tensor attn = ad::softmax_lastdim(scores);
  const Tensor heads = ad::matmul(attn, v);  // [n, h, T, d]
  const std::size_t axes[4] = {0, 2, 1, 3};
  const Tensor merged = ad::reshape(ad::permute(heads, axes), {n, t, c});
  return params.proj.forward(merged);
}

Tensor stl_forward(const Tensor& x, const StlParams& params) {
  const auto& cfg = params.config;
  if (x.rank() != 3 || x.dim(0) != cfg.embed_dim) {
    throw ShapeError("stl_forward: input " + ad::shape_string(x.shape()) + " for embed_dim " +
                     std::to_string(cfg.embed_dim));
  }
  const auto layout = WindowLayout::make(x.dim(0), x.dim(1), x.dim(2), cfg.window, cfg.shift);
  const Tensor x1 = window_partition(x, layout);
  const Tensor x2 = ad::add(window_msa(params.norm1.forward(x1), params), x1);
  const Tensor hidden = ad::gelu(params.fc1.forward(params.norm2.forward(x2)));
  const Tensor x3 = ad::add(params.fc2.forward(hidden), x2);
  return window_merge(x3, layout);
}

Tensor rstr_forward(const Tensor& x, const RstrParams& params) {
  if (x.rank() != 3 || x.dim(0) != 1) throw ShapeError("rstr_forward: input must be [1,H,W], got " + ad::shape_string(x.shape()));
  const Tensor shallow = params.conv_in.forward(x);
  const Tensor deep = stl_forward(shallow, params.stl);
  const Tensor out = params.conv_out.forward(deep);
  return params.config.outer_residual ? ad::add(out, x) : out;
}

Tensor residual_cnn_forward(const Tensor& x, const ResidualCnnParams& params) {
  if (x.rank() != 3 || x.dim(0) != 1) {
    throw ShapeError("residual_cnn_forward: input must be [1,H,W], got " + ad::shape_string(x.shape()));
  }
  const Tensor h1 = ad::gelu(params.conv1.forward(x));
  const Tensor h2 = ad::gelu(params.conv2.forward(h1));
  return ad::add(params.conv3.forward(h2), x);
}

RstrParams init_rstr(const RstrConfig& config, CounterRng& rng, bool zero_init_outputs) {
  config.stl.validate();
  const std::size_t c = config.stl.embed_dim;
  const std::size_t hidden = c * config.stl.mlp_ratio;
  RstrParams p;
  p.config = config;
  p.conv_in = make_conv(1, c, rng, false);
  p.stl.config = config.stl;
  p.stl.norm1 = make_norm(c);
  p.stl.query = make_linear(c, c, rng, false);
  p.stl.key = make_linear(c, c, rng, false);
  p.stl.value = make_linear(c, c, rng, false);
  p.stl.proj = make_linear(c, c, rng, zero_init_outputs);
  p.stl.norm2 = make_norm(c);
  p.stl.fc1 = make_linear(c, hidden, rng, false);
  p.stl.fc2 = make_linear(hidden, c, rng, zero_init_outputs);
  p.conv_out = make_conv(c, 1, rng, zero_init_outputs);
  auto named = named_parameters(p);
  require_grad(named);
  return p;
}

ResidualCnnParams init_residual_cnn(const ResidualCnnConfig& config, CounterRng& rng, bool zero_init_outputs) {
  if (config.channels == 0) throw ConfigError("residual CNN needs at least one channel");
  ResidualCnnParams p;
  p.config = config;
  p.conv1 = make_conv(1, config.channels, rng, false);
  p.conv2 = make_conv(config.channels, config.channels, rng, false);
  p.conv3 = make_conv(config.channels, 1, rng, zero_init_outputs);
  auto named = named_parameters(p);
  require_grad(named);
  return p;
}

std::vector<NamedTensor> named_parameters(RstrParams& p) {
  std::vector<NamedTensor> out;
  push(out, "conv_in", p.conv_in);
  push(out, "stl.norm1", p.stl.norm1);
  push(out, "stl.attn.query", p.stl.query);
  push(out, "stl.attn.key", p.stl.key);
  push(out, "stl.attn.value", p.stl.value);
  push(out, "stl.attn.proj", p.stl.proj);
  push(out, "stl.norm2", p.stl.norm2);
  push(out, "stl.mlp.fc1", p.stl.fc1);
  push(out, "stl.mlp.fc2", p.stl.fc2);
  push(out, "conv_out", p.conv_out);
  return out;
}

std::vector<NamedTensor> named_parameters(ResidualCnnParams& p) {
  std::vector<NamedTensor> out;
  push(out, "conv1", p.conv1);
  push(out, "conv2", p.conv2);
  push(out, "conv3", p.conv3);
  return out;
}

nlohmann::json to_json(const RstrConfig& config) {
  return {{"kind", "rstr"},
          {"embed_dim", config.stl.embed_dim},
          {"window", config.stl.window},
          {"heads", config.stl.heads},
          {"mlp_ratio", config.stl.mlp_ratio},
          {"shift", config.stl.shift},
          {"outer_residual", config.outer_residual}};
}

RstrConfig rstr_config_from_json(const nlohmann::json& j) {
  RstrConfig c;
  c.stl.embed_dim = j.value("embed_dim", c.stl.embed_dim);
  c.stl.window = j.value("window", c.stl.window);
  c.stl.heads = j.value("heads", c.stl.heads);
  c.stl.mlp_ratio = j.value("mlp_ratio", c.stl.mlp_ratio);
  c.stl.shift = j.value("shift", c.stl.shift);
  c.outer_residual = j.value("outer_residual", c.outer_residual);
  c.stl.validate();
  return c;
}

nlohmann::json RstrRegularizer::config_json() const { return to_json(params_.config); }

nlohmann::json to_json(const ResidualCnnConfig& config) { return {{"kind", "cnn"}, {"channels", config.channels}}; }

nlohmann::json ResidualCnnRegularizer::config_json() const { return to_json(params_.config); }

std::unique_ptr<Regularizer> make_regularizer(const nlohmann::json& config, CounterRng& rng, bool zero_init_outputs) {
  const std::string kind = config.value("kind", std::string("rstr"));
  try {
    if (kind == "rstr") {
      return std::make_unique<RstrRegularizer>(init_rstr(rstr_config_from_json(config), rng, zero_init_outputs));
    }
    if (kind == "cnn") {
      ResidualCnnConfig c;
      c.channels = config.value("channels", c.channels);
      return std::make_unique<ResidualCnnRegularizer>(init_residual_cnn(c, rng, zero_init_outputs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid regularizer config: ") + e.what());
  }
  throw ConfigError("unknown regularizer kind: " + kind);
}

void save_parameters(std::ostream& out, const std::vector<NamedTensor>& params) {
  std::vector<NamedArray> records;
  records.reserve(params.size());
  for (const auto& p : params) {
    NamedArray r;
    r.name = p.name;
    r.shape.assign(p.tensor.shape().begin(), p.tensor.shape().end());
    r.data.assign(p.tensor.data().begin(), p.tensor.data().end());
    records.push_back(std::move(r));
  }
  write_param_records(out, records);
}

void load_parameters(std::istream& in, std::vector<NamedTensor>& params) {
  auto records = read_param_records(in);
  if (records.size() != params.size()) {
    throw IoError("parameter container holds " + std::to_string(records.size()) + " records, expected " +
                  std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& r = records[i];
    const std::vector<std::uint64_t> shape(p.tensor.shape().begin(), p.tensor.shape().end());
    if (r.name != p.name || r.shape != shape) {
      throw IoError("parameter record " + r.name + " does not match expected " + p.name);
    }
    auto dst = p.tensor.mutable_data();
    std::copy(r.data.begin(), r.data.end(), dst.begin());
  }
}

}  // namespace petrecon::nn
