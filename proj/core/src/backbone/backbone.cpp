// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/backbone/backbone.hpp"

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"

namespace semfuse::backbone {

using num::Tensor;

void BackboneConfig::validate() const {
  if (d_model == 0 || heads == 0 || layers == 0 || ffn_mult == 0) {
    throw ConfigError("backbone dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (fusion_after_layer < 1 || fusion_after_layer >= layers) {
    throw ConfigError("fusion_after_layer " + std::to_string(fusion_after_layer) +
                      " outside [1, " + std::to_string(layers - 1) + "]");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, std::size_t num_patches, std::size_t patch_len,
                      std::size_t horizon, num::Rng& rng, bool lower_only)
    : cfg_(cfg),
      num_patches_(num_patches),
      patch_len_(patch_len),
      horizon_(horizon),
      lower_only_(lower_only) {
  cfg_.validate();
  if (num_patches == 0 || patch_len == 0 || horizon == 0) {
    throw ConfigError("backbone needs positive patch count, patch length and horizon");
  }
  w_t_ = Tensor<T>::zeros({patch_len, cfg.d_model}, true);
  rng.fill_truncated_normal(w_t_.mutable_values(), 0.02);
  e_pos_ = Tensor<T>::zeros({num_patches, cfg.d_model}, true);
  rng.fill_truncated_normal(e_pos_.mutable_values(), 0.02);
  const std::size_t built = lower_only ? cfg.fusion_after_layer : cfg.layers;
  layers_.reserve(built);
  for (std::size_t i = 0; i < built; ++i) {
    layers_.emplace_back(cfg.d_model, cfg.heads, cfg.ffn_mult, false, cfg.dropout, rng);
  }
  if (!lower_only) head_ = nn::Linear<T>(num_patches * cfg.d_model, horizon, true, rng);
}

template <typename T>
Tensor<T> Backbone<T>::embed_patches(const Tensor<T>& patches) const {
  if (patches.rank() != 3 || patches.dim(2) != patch_len_) {
    throw DimensionError("patches " + num::shape_str(patches.shape()) + ", expected [B, N, " +
                         std::to_string(patch_len_) + "]");
  }
  if (patches.dim(1) != num_patches_) {
    throw ConfigError("patch count " + std::to_string(patches.dim(1)) +
                      " does not match positional table of " + std::to_string(num_patches_));
  }
  return num::add(num::matmul(patches, w_t_), e_pos_);
}

template <typename T>
Tensor<T> Backbone<T>::run_layers(const Tensor<T>& z, std::size_t first, std::size_t last,
                                  const nn::RunContext& ctx) const {
  Tensor<T> h = z;
  for (std::size_t i = first; i < last; ++i) h = layers_[i].forward(h, ctx);
  return h;
}

template <typename T>
Tensor<T> Backbone<T>::forward_lower(const Tensor<T>& patches, const nn::RunContext& ctx) const {
  return run_layers(embed_patches(patches), 0, cfg_.fusion_after_layer, ctx);
}

template <typename T>
Tensor<T> Backbone<T>::forward_upper(const Tensor<T>& z, const nn::RunContext& ctx) const {
  if (lower_only_) throw CapabilityError("backbone was built without upper layers");
  if (z.rank() != 3 || z.dim(1) != num_patches_ || z.dim(2) != cfg_.d_model) {
    throw DimensionError("upper layers got " + num::shape_str(z.shape()));
  }
  return run_layers(z, cfg_.fusion_after_layer, cfg_.layers, ctx);
}

template <typename T>
Tensor<T> Backbone<T>::forecast_head(const Tensor<T>& z_last) const {
  if (lower_only_) throw CapabilityError("backbone was built without a forecast head");
  const std::size_t b = z_last.dim(0);
  auto flat = num::reshape(z_last, {b, num_patches_ * cfg_.d_model});
  return head_.forward(flat);
}

template <typename T>
Tensor<T> Backbone<T>::forward(const Tensor<T>& patches, const nn::RunContext& ctx) const {
  return forecast_head(forward_upper(forward_lower(patches, ctx), ctx));
}

template <typename T>
void Backbone<T>::collect(const std::string& prefix, nn::NamedParams<T>& out) const {
  out.emplace_back(prefix + ".patch_embed.weight", w_t_);
  out.emplace_back(prefix + ".pos_embed", e_pos_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layers." + std::to_string(i), out);
  }
  if (!lower_only_) head_.collect(prefix + ".head", out);
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ContractError("mse_loss shape mismatch: " + num::shape_str(pred.shape()) + " vs " +
                        num::shape_str(target.shape()));
  }
  return num::mean(num::square(num::sub(pred, target)));
}

template class Backbone<float>;
template class Backbone<double>;
template Tensor<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> mse_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace semfuse::backbone
