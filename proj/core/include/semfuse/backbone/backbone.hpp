// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "semfuse/nn/layers.hpp"
#include "semfuse/numerics/tensor.hpp"

namespace semfuse::backbone {

struct BackboneConfig {
  std::size_t d_model = 16;
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t fusion_after_layer = 2;
  std::size_t ffn_mult = 4;
  double dropout = 0.1;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  static BackboneConfig general() { return {}; }
  static BackboneConfig ili() { return {128, 16, 3, 2, 4, 0.1}; }
};

/// Patch-level Transformer encoder with a split point for feature injection.
///
/// Inputs are batched patch tensors [B, N, T]; intermediate states are
/// [B, N, d_model]; predictions are [B, T_y].
template <typename T>
class Backbone {
 public:
  /// With `lower_only`, only layers 1..fusion_after_layer are built and there
  /// is no head; forward_upper and forecast_head then throw CapabilityError.
  Backbone(const BackboneConfig& cfg, std::size_t num_patches, std::size_t patch_len,
           std::size_t horizon, num::Rng& rng, bool lower_only = false);

  /// Z = X W_t + E_pos.
  num::Tensor<T> embed_patches(const num::Tensor<T>& patches) const;
  /// Layers 1 .. fusion_after_layer applied to the embedded patches.
  num::Tensor<T> forward_lower(const num::Tensor<T>& patches, const nn::RunContext& ctx = {}) const;
  /// Layers fusion_after_layer+1 .. L.
  num::Tensor<T> forward_upper(const num::Tensor<T>& z, const nn::RunContext& ctx = {}) const;
  /// Row-major flatten of [B, N, d_model] then the affine head.
  num::Tensor<T> forecast_head(const num::Tensor<T>& z_last) const;
  /// lower, upper and head with nothing injected.
  num::Tensor<T> forward(const num::Tensor<T>& patches, const nn::RunContext& ctx = {}) const;

  /// Layers [first, last) applied to z.
  num::Tensor<T> run_layers(const num::Tensor<T>& z, std::size_t first, std::size_t last,
                            const nn::RunContext& ctx) const;

  const BackboneConfig& config() const { return cfg_; }
  std::size_t num_patches() const { return num_patches_; }
  std::size_t patch_len() const { return patch_len_; }
  std::size_t horizon() const { return horizon_; }
  bool lower_only() const { return lower_only_; }

  num::Tensor<T>& patch_weight() { return w_t_; }
  num::Tensor<T>& positions() { return e_pos_; }
  nn::Linear<T>& head() { return head_; }
  nn::TransformerBlock<T>& layer(std::size_t i) { return layers_.at(i); }
  const nn::TransformerBlock<T>& layer(std::size_t i) const { return layers_.at(i); }

  void collect(const std::string& prefix, nn::NamedParams<T>& out) const;

 private:
  BackboneConfig cfg_;
  std::size_t num_patches_;
  std::size_t patch_len_;
  std::size_t horizon_;
  bool lower_only_;
  num::Tensor<T> w_t_;    // [T, d_model]
  num::Tensor<T> e_pos_;  // [N, d_model]
  std::vector<nn::TransformerBlock<T>> layers_;
  nn::Linear<T> head_;    // [N * d_model, T_y]
};

/// Mean over all elements of (pred - target)^2.
template <typename T>
num::Tensor<T> mse_loss(const num::Tensor<T>& pred, const num::Tensor<T>& target);

}  // namespace semfuse::backbone
