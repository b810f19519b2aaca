// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "semfuse/nn/layers.hpp"

namespace semfuse::fusion {

enum class GateMode {
  kVector,  // one gate per feature: Linear(2 d_model -> d_model)
  kScalar,  // one gate per patch position: Linear(2 d_model -> 1)
  kNone,    // no gate; the aligned LM features are added
};

template <typename T>
struct FusionOutput {
  num::Tensor<T> aligned;  // Z_LLM' [B, N, d_model]
  num::Tensor<T> gate;     // g; undefined for GateMode::kNone
  num::Tensor<T> fused;    // Z_E^{l-1}
};

/// Aligns LM features to the backbone width and blends them with Z^{l-1}.
template <typename T>
class GatedFusion {
 public:
  GatedFusion(std::size_t d_lm, std::size_t d_model, GateMode mode, num::Rng& rng);

  /// Bias-free d_lm -> d_model map.
  num::Tensor<T> align(const num::Tensor<T>& z_llm) const;
  /// sigmoid(W [a, z] + b), concatenating features in the order [a, z].
  num::Tensor<T> gate(const num::Tensor<T>& aligned, const num::Tensor<T>& z) const;
  /// g * a + (1 - g) * z; g may be [.., 1] and broadcast over features.
  static num::Tensor<T> fuse(const num::Tensor<T>& aligned, const num::Tensor<T>& z,
                             const num::Tensor<T>& g);

  FusionOutput<T> forward(const num::Tensor<T>& z_llm, const num::Tensor<T>& z) const;

  /// Replaces the learned gate with a constant (test and ablation hook).
  void force_gate(std::optional<double> value) { forced_ = value; }
  std::optional<double> forced_gate() const { return forced_; }

  GateMode mode() const { return mode_; }
  nn::Linear<T>& align_map() { return align_; }
  nn::Linear<T>& gate_map() { return gate_; }

  void collect(const std::string& prefix, nn::NamedParams<T>& out) const;

 private:
  GateMode mode_;
  std::size_t d_model_;
  nn::Linear<T> align_;
  nn::Linear<T> gate_;
  std::optional<double> forced_;
};

}  // namespace semfuse::fusion
