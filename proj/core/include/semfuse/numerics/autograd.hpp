// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "semfuse/numerics/tensor.hpp"

namespace semfuse::num {

/// Executed differentiable operations reachable from a root, in topological
/// order (every node appears after all nodes producing its inputs).
template <typename T>
struct ComputationRecord {
  std::vector<Node<T>*> nodes;
};

template <typename T>
ComputationRecord<T> record_of(const Tensor<T>& root);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are discarded when the sweep finishes.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace semfuse::num
