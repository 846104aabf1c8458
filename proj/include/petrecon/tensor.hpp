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

#ifndef PETRECON_TENSOR_HPP
#define PETRECON_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace petrecon::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Graph;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until the first gradient is written.
  std::vector<double> grad;
  bool requires_grad = false;
  // Non-null for tensors produced by a recorded op.
  Graph* graph = nullptr;
  std::size_t node = 0;

  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 array with optional gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage. Use clone() for
/// an independent copy. Leaf tensors created with requires_grad(true) collect
/// gradients when a loss built from them under an active Graph is
/// back-propagated.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zeros when no gradient has been written yet.
  std::vector<double> grad() const;
  void zero_grad();

  // Independent copy of the values, detached from any graph.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Append-only tape of recorded operations.
///
/// Ops record a node only while a Graph is active on the calling thread (see
/// Scope) and at least one input requires gradients. Without an active graph
/// every op is a plain forward computation.
class Graph {
 public:
  // Receives the output gradient and one writable buffer per input. Buffers
  // of inputs that do not require gradients are empty. Implementations add
  // into the buffers.
  using BackwardFn = std::function<void(std::span<const double> out_grad,
                                        std::span<const std::span<double>> in_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  class Scope {
   public:
    explicit Scope(Graph& graph);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph* previous_;
  };

  static Graph* active();

  // True when an op over `inputs` must be recorded.
  static bool should_record(std::initializer_list<const Tensor*> inputs);

  void record(Tensor& output, std::vector<Tensor> inputs, BackwardFn fn);

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)=1 and walks the tape in reverse append order. Gradients of
  // intermediate tensors are reset first; leaf gradients accumulate.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
};

/// Back-propagates from a scalar loss through the graph that produced it.
void backward(const Tensor& loss);

}  // namespace petrecon::ad

#endif  // PETRECON_TENSOR_HPP
