// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/numerics/autograd.hpp"

#include <unordered_set>
#include <utility>

#include "semfuse/errors.hpp"

namespace semfuse::num {

template <typename T>
ComputationRecord<T> record_of(const Tensor<T>& root) {
  ComputationRecord<T> record;
  if (!root.defined()) return record;
  // Iterative post-order DFS so deep graphs do not exhaust the stack.
  std::unordered_set<const Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    record.nodes.push_back(node);
    stack.pop_back();
  }
  return record;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  auto record = record_of(loss);
  for (auto* node : record.nodes) {
    if (!node->is_leaf()) node->grad.clear();
  }
  Node<T>* root = loss.node();
  const T one = T(1);
  root->accumulate_grad(std::span<const T>(&one, 1));
  for (auto it = record.nodes.rbegin(); it != record.nodes.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf() || node->grad.empty()) continue;
    node->backward_fn(*node);
  }
  for (auto* node : record.nodes) {
    if (!node->is_leaf()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

template struct ComputationRecord<float>;
template struct ComputationRecord<double>;
template ComputationRecord<float> record_of(const Tensor<float>&);
template ComputationRecord<double> record_of(const Tensor<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace semfuse::num
