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

#include "cstrack/autograd.hpp"

#include <unordered_set>

#include "cstrack/error.hpp"

namespace cstrack {

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Var Var::constant(Tensor value) { return leaf(std::move(value), false); }

void Var::set_requires_grad(bool on) {
  if (!node_->is_leaf) {
    throw UsageError("requires_grad can only be toggled on leaves");
  }
  node_->requires_grad = on;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(Node&)> backward, const char* op) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output from op '") + op + "'");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  node->op = op;
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->inputs.reserve(inputs.size());
    for (Var& v : inputs) node->inputs.push_back(v.node());
  }
  return Var(std::move(node));
}

Tape Tape::record(const Var& root) {
  Tape tape;
  if (!root.requires_grad()) return tape;
  // Iterative post-order DFS; each node is emitted after all its inputs.
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::backward(const Var& root) const {
  if (nodes_.empty()) return;
  for (Node* n : nodes_) {
    if (!n->is_leaf) n->grad = Tensor();
  }
  Tensor& seed = root.node()->grad_buffer();
  for (std::size_t i = 0; i < seed.size(); ++i) seed[i] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf || !n->backward) continue;
    if (n->grad.empty()) continue;  // no path from root reached it
    n->backward(*n);
  }
}

void backward(const Var& loss) {
  if (!loss.valid() || loss.value().size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     (loss.valid() ? shape_to_string(loss.shape())
                                   : std::string("<null>")));
  }
  if (!loss.requires_grad()) return;
  Tape::record(loss).backward(loss);
}

}  // namespace cstrack
