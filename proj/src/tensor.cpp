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

#include "petrecon/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "petrecon/errors.hpp"

namespace petrecon::ad {

namespace {
thread_local Graph* g_active_graph = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::span<double> detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, value); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("axis out of range for shape " + shape_string(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_string(shape()));
  return impl_->data[0];
}

Tensor& Tensor::requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data); }

Graph::Scope::Scope(Graph& graph) : previous_(g_active_graph) { g_active_graph = &graph; }

Graph::Scope::~Scope() { g_active_graph = previous_; }

Graph* Graph::active() { return g_active_graph; }

bool Graph::should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_graph == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t != nullptr && t->requires_grad(); });
}

void Graph::record(Tensor& output, std::vector<Tensor> inputs, BackwardFn fn) {
  Node node;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.impl());
  node.output = output.impl();
  node.fn = std::move(fn);
  output.impl()->requires_grad = true;
  output.impl()->graph = this;
  output.impl()->node = nodes_.size();
  nodes_.push_back(std::move(node));
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(loss.shape()));
  }
  const auto& loss_impl = loss.impl();
  if (loss_impl->graph != this) throw ConfigError("loss was not produced by this graph");
  const std::size_t last = loss_impl->node;

  for (std::size_t i = 0; i <= last; ++i) {
    auto& out = *nodes_[i].output;
    out.grad.assign(out.data.size(), 0.0);
  }
  loss_impl->grad[0] = 1.0;

  std::vector<std::span<double>> buffers;
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& node = nodes_[i];
    buffers.clear();
    for (auto& in : node.inputs) {
      if (in->requires_grad) {
        buffers.push_back(in->grad_buffer());
      } else {
        buffers.emplace_back();
      }
    }
    node.fn(node.output->grad, buffers);
  }
}

void backward(const Tensor& loss) {
  Graph* graph = loss.impl()->graph;
  if (graph == nullptr) throw ConfigError("backward on a tensor that was not produced by a recorded graph");
  graph->backward(loss);
}

}  // namespace petrecon::ad
