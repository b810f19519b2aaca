// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "semfuse/numerics/tensor.hpp"

namespace semfuse::num {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Owns first/second moment state per parameter.
/// step() leaves gradients in place; call zero_grad() before the next pass.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options);

  /// Throws ContractError when a registered parameter has no gradient.
  void step();
  void zero_grad();

  std::size_t steps_taken() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::size_t step_ = 0;
};

}  // namespace semfuse::num
