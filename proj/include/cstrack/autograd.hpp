/* Copyright 2026 The CSTrack Desk Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cstrack/tensor.hpp"

namespace cstrack {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded operation (or a leaf). Gradients flow from `grad` of this
/// node into the `grad` of each input through `backward`.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; same shape as value once present
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

/// Handle to a node of the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var leaf(Tensor value, bool requires_grad = true);
  static Var constant(Tensor value);

  const Tensor& value() const { return node_->value; }
  /// Direct mutation is reserved for optimizers and finite-difference probes.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient, or zeros of the value's shape when none has been accumulated.
  Tensor grad() const;
  void zero_grad();

  bool valid() const { return static_cast<bool>(node_); }
  const NodePtr& node() const { return node_; }
  Var detach() const { return Var::constant(value()); }

 private:
  NodePtr node_;
};

/// Builds a non-leaf node. If no input requires grad the node is a constant
/// and nothing is recorded.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(Node&)> backward, const char* op);

/// Topologically ordered record of the operations reachable from a root.
class Tape {
 public:
  static Tape record(const Var& root);

  const std::vector<Node*>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds the root with ones and runs every recorded backward rule once,
  /// in reverse topological order. Interior gradients are reset first so that
  /// only leaves accumulate across repeated calls.
  void backward(const Var& root) const;

 private:
  std::vector<Node*> nodes_;
};

/// ∂loss/∂leaf accumulated into every requires-grad leaf. `loss` must hold a
/// single element.
void backward(const Var& loss);

}  // namespace cstrack
