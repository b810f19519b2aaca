// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "semfuse/errors.hpp"

namespace semfuse::nn {

using num::Tensor;

template <typename T>
Tensor<T> LoraAdapter<T>::delta(const Tensor<T>& x) const {
  auto h = num::matmul(x, num::transpose(a));
  return num::scale(num::matmul(h, num::transpose(b)), static_cast<T>(scaling));
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, bool bias, num::Rng& rng, double init_std) {
  weight_ = Tensor<T>::zeros({in, out}, true);
  rng.fill_truncated_normal(weight_.mutable_values(), init_std);
  if (bias) bias_ = Tensor<T>::zeros({out}, true);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  auto y = num::linear(x, weight_, bias_);
  if (lora_) y = num::add(y, lora_->delta(x));
  return y;
}

template <typename T>
void Linear<T>::attach_lora(std::size_t rank, double alpha, num::Rng& rng) {
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  if (rank == 0 || rank >= std::min(in, out)) {
    throw ConfigError("lora rank " + std::to_string(rank) + " must be in [1, " +
                      std::to_string(std::min(in, out)) + ")");
  }
  weight_.set_requires_grad(false);
  if (bias_) bias_.set_requires_grad(false);
  LoraAdapter<T> ad;
  ad.a = Tensor<T>::zeros({rank, in}, true);
  // Kaiming-uniform bound for a fan-in of `in`.
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  rng.fill_uniform(ad.a.mutable_values(), -bound, bound);
  ad.b = Tensor<T>::zeros({out, rank}, true);
  ad.scaling = alpha / static_cast<double>(rank);
  lora_ = std::move(ad);
}

template <typename T>
Tensor<T> Linear<T>::merged_weight() const {
  if (!lora_) return weight_.detach();
  num::NoGradGuard guard;
  auto ba = num::matmul(lora_->b, lora_->a);  // [out, in]
  auto delta = num::scale(num::transpose(ba), static_cast<T>(lora_->scaling));
  return num::add(weight_, delta).detach();
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
  out.emplace_back(prefix + ".weight", weight_);
  if (bias_) out.emplace_back(prefix + ".bias", bias_);
  if (lora_) {
    out.emplace_back(prefix + ".lora_A", lora_->a);
    out.emplace_back(prefix + ".lora_B", lora_->b);
  }
}

template <typename T>
LayerNormParams<T>::LayerNormParams(std::size_t d, double eps_)
    : gain(Tensor<T>::full({d}, T(1), true)), bias(Tensor<T>::zeros({d}, true)), eps(eps_) {}

template <typename T>
Tensor<T> LayerNormParams<T>::forward(const Tensor<T>& x) const {
  return num::layer_norm(x, gain, bias, static_cast<T>(eps));
}

template <typename T>
void LayerNormParams<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
  out.emplace_back(prefix + ".weight", gain);
  out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::size_t d_model, std::size_t heads, bool causal,
                                          num::Rng& rng)
    : d_model_(d_model), heads_(heads), causal_(causal) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by heads " +
                      std::to_string(heads));
  }
  q_ = Linear<T>(d_model, d_model, true, rng);
  k_ = Linear<T>(d_model, d_model, true, rng);
  v_ = Linear<T>(d_model, d_model, true, rng);
  o_ = Linear<T>(d_model, d_model, true, rng);
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::split_heads(const Tensor<T>& x) const {
  const std::size_t b = x.dim(0), l = x.dim(1);
  auto r = num::reshape(x, {b, l, heads_, d_model_ / heads_});
  return num::permute(r, {0, 2, 1, 3});
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::merge_heads(const Tensor<T>& x) const {
  const std::size_t b = x.dim(0), l = x.dim(2);
  return num::reshape(num::permute(x, {0, 2, 1, 3}), {b, l, d_model_});
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::attend(const Tensor<T>& q, const Tensor<T>& k,
                                        const Tensor<T>& v, const num::Mask* mask,
                                        bool capture) const {
  const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_model_ / heads_)));
  auto scores = num::scale(num::matmul(q, num::transpose(k)), inv);
  auto probs = num::softmax_lastdim(scores, mask);
  if (capture) captured_ = probs.detach();
  return num::matmul(probs, v);
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(2) != d_model_) {
    throw DimensionError("attention input " + num::shape_str(x.shape()) + ", expected [B, L, " +
                         std::to_string(d_model_) + "]");
  }
  auto q = split_heads(q_.forward(x));
  auto k = split_heads(k_.forward(x));
  auto v = split_heads(v_.forward(x));
  std::optional<num::Mask> mask;
  if (causal_) mask = num::Mask::causal(x.dim(1), x.dim(1));
  auto ctx = attend(q, k, v, mask ? &*mask : nullptr, capture_);
  return o_.forward(merge_heads(ctx));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> MultiHeadAttention<T>::forward_with_prefix(
    const Tensor<T>& prefix, const Tensor<T>& body) const {
  if (!causal_) throw ContractError("shared-prefix attention requires a causal layer");
  if (prefix.rank() != 3 || prefix.dim(0) != 1 || body.rank() != 3 ||
      prefix.dim(2) != d_model_ || body.dim(2) != d_model_) {
    throw DimensionError("prefix " + num::shape_str(prefix.shape()) + " / body " +
                         num::shape_str(body.shape()) + " incompatible with d=" +
                         std::to_string(d_model_));
  }
  const std::size_t b = body.dim(0), lp = prefix.dim(1), lb = body.dim(1);

  auto qp = split_heads(q_.forward(prefix));
  auto kp = split_heads(k_.forward(prefix));
  auto vp = split_heads(v_.forward(prefix));
  Tensor<T> prefix_out;
  if (lp > 0) {
    auto mask = num::Mask::causal(lp, lp);
    prefix_out = o_.forward(merge_heads(attend(qp, kp, vp, &mask, false)));
  } else {
    prefix_out = prefix;
  }

  auto qb = split_heads(q_.forward(body));
  auto kb = split_heads(k_.forward(body));
  auto vb = split_heads(v_.forward(body));
  const std::size_t dh = d_model_ / heads_;
  auto keys = num::concat<T>({num::broadcast_to(kp, {b, heads_, lp, dh}), kb}, 2);
  auto vals = num::concat<T>({num::broadcast_to(vp, {b, heads_, lp, dh}), vb}, 2);
  auto mask = num::Mask::causal(lb, lp + lb, lp);
  auto body_out = o_.forward(merge_heads(attend(qb, keys, vals, &mask, capture_)));
  return {prefix_out, body_out};
}

template <typename T>
void MultiHeadAttention<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
  q_.collect(prefix + ".q_proj", out);
  k_.collect(prefix + ".k_proj", out);
  v_.collect(prefix + ".v_proj", out);
  o_.collect(prefix + ".out_proj", out);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(std::size_t d_model, std::size_t heads,
                                      std::size_t ffn_mult, bool causal, double dropout,
                                      num::Rng& rng)
    : ln1_(d_model),
      ln2_(d_model),
      attn_(d_model, heads, causal, rng),
      fc_in_(d_model, ffn_mult * d_model, true, rng),
      fc_out_(ffn_mult * d_model, d_model, true, rng),
      dropout_(dropout) {
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

template <typename T>
Tensor<T> TransformerBlock<T>::ffn(const Tensor<T>& x, const RunContext& ctx) const {
  auto h = fc_out_.forward(num::gelu(fc_in_.forward(ln2_.forward(x))));
  return num::add(x, maybe_dropout(h, ctx));
}

template <typename T>
Tensor<T> TransformerBlock<T>::maybe_dropout(const Tensor<T>& x, const RunContext& ctx) const {
  if (!ctx.training || dropout_ == 0.0) return x;
  if (!ctx.rng) throw ContractError("training-mode dropout needs a generator");
  return num::dropout(x, dropout_, *ctx.rng, true);
}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x, const RunContext& ctx) const {
  auto h = num::add(x, maybe_dropout(attn_.forward(ln1_.forward(x)), ctx));
  return ffn(h, ctx);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> TransformerBlock<T>::forward_with_prefix(
    const Tensor<T>& prefix, const Tensor<T>& body, const RunContext& ctx) const {
  auto [ap, ab] = attn_.forward_with_prefix(ln1_.forward(prefix), ln1_.forward(body));
  Tensor<T> hp = prefix;
  if (prefix.dim(1) > 0) hp = ffn(num::add(prefix, maybe_dropout(ap, ctx)), ctx);
  auto hb = ffn(num::add(body, maybe_dropout(ab, ctx)), ctx);
  return {hp, hb};
}

template <typename T>
void TransformerBlock<T>::make_identity() {
  for (auto* lin : {&attn_.output(), &fc_out_}) {
    auto w = lin->weight().mutable_values();
    std::fill(w.begin(), w.end(), T(0));
    auto b = lin->bias().mutable_values();
    std::fill(b.begin(), b.end(), T(0));
  }
}

template <typename T>
void TransformerBlock<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
  ln1_.collect(prefix + ".ln_1", out);
  attn_.collect(prefix + ".attn", out);
  ln2_.collect(prefix + ".ln_2", out);
  fc_in_.collect(prefix + ".mlp.fc_in", out);
  fc_out_.collect(prefix + ".mlp.fc_out", out);
}

template <typename T>
std::size_t copy_matching(const NamedParams<T>& from, const NamedParams<T>& to) {
  std::map<std::string, const Tensor<T>*> index;
  for (const auto& [name, t] : from) index[name] = &t;
  std::size_t copied = 0;
  for (const auto& [name, t] : to) {
    auto it = index.find(name);
    if (it == index.end() || it->second->shape() != t.shape()) continue;
    auto src = it->second->values();
    auto dst = const_cast<Tensor<T>&>(t).mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
    ++copied;
  }
  return copied;
}

template <typename T>
std::vector<Tensor<T>> trainable(const NamedParams<T>& params) {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : params) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

#define SEMFUSE_INSTANTIATE(T)                                                         \
  template struct LoraAdapter<T>;                                                      \
  template class Linear<T>;                                                            \
  template struct LayerNormParams<T>;                                                  \
  template class MultiHeadAttention<T>;                                                \
  template class TransformerBlock<T>;                                                  \
  template std::size_t copy_matching<T>(const NamedParams<T>&, const NamedParams<T>&); \
  template std::vector<Tensor<T>> trainable<T>(const NamedParams<T>&);

SEMFUSE_INSTANTIATE(float)
SEMFUSE_INSTANTIATE(double)

#undef SEMFUSE_INSTANTIATE

}  // namespace semfuse::nn
