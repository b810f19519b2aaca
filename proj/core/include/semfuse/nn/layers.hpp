// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Parameter-bearing building blocks shared by the patch encoder and the
// language model: linear maps (with optional low-rank adapters), layer norm,
// multi-head attention and the pre-norm transformer block.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semfuse/numerics/ops.hpp"
#include "semfuse/numerics/random.hpp"
#include "semfuse/numerics/tensor.hpp"

namespace semfuse::nn {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, num::Tensor<T>>>;

/// Training flag plus the generator dropout draws from.
struct RunContext {
  bool training = false;
  num::Rng* rng = nullptr;
};

/// Low-rank update `scaling * B * A` on a frozen [in, out] weight.
/// A is [rank, in], B is [out, rank]; B starts at zero.
template <typename T>
struct LoraAdapter {
  num::Tensor<T> a;
  num::Tensor<T> b;
  double scaling = 1.0;

  std::size_t rank() const { return a.dim(0); }
  num::Tensor<T> delta(const num::Tensor<T>& x) const;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  /// Weight [in, out] drawn from a truncated normal; bias zeros.
  Linear(std::size_t in, std::size_t out, bool bias, num::Rng& rng, double init_std = 0.02);

  num::Tensor<T> forward(const num::Tensor<T>& x) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

  num::Tensor<T>& weight() { return weight_; }
  const num::Tensor<T>& weight() const { return weight_; }
  num::Tensor<T>& bias() { return bias_; }
  const num::Tensor<T>& bias() const { return bias_; }

  /// Freezes the base weight/bias and adds a trainable adapter.
  /// Throws ConfigError when rank >= min(in, out) or rank == 0.
  void attach_lora(std::size_t rank, double alpha, num::Rng& rng);
  bool has_lora() const { return lora_.has_value(); }
  const LoraAdapter<T>& lora() const { return *lora_; }
  LoraAdapter<T>& lora() { return *lora_; }
  /// W + scaling * (B A)^T in this class's [in, out] layout.
  num::Tensor<T> merged_weight() const;

  void collect(const std::string& prefix, NamedParams<T>& out) const;

 private:
  num::Tensor<T> weight_;
  num::Tensor<T> bias_;
  std::optional<LoraAdapter<T>> lora_;
};

template <typename T>
struct LayerNormParams {
  num::Tensor<T> gain;
  num::Tensor<T> bias;
  double eps = 1e-5;

  LayerNormParams() = default;
  explicit LayerNormParams(std::size_t d, double eps = 1e-5);
  num::Tensor<T> forward(const num::Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedParams<T>& out) const;
};

/// Multi-head self-attention over [B, L, d]. Optionally causal.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t heads, bool causal, num::Rng& rng);

  num::Tensor<T> forward(const num::Tensor<T>& x) const;

  /// Causal attention over the concatenation [prefix; body] where the prefix
  /// ([1, Lp, d]) is shared by every batch row of `body` ([B, Lb, d]).
  /// Equivalent to forward() on the explicitly concatenated sequence.
  std::pair<num::Tensor<T>, num::Tensor<T>> forward_with_prefix(const num::Tensor<T>& prefix,
                                                                const num::Tensor<T>& body) const;

  /// When enabled, each forward stores its attention weights (detached,
  /// [B, H, Lq, Lk]; for the prefix path only the body rows are kept).
  void set_capture(bool on) { capture_ = on; }
  const num::Tensor<T>& captured() const { return captured_; }

  std::size_t heads() const { return heads_; }
  bool causal() const { return causal_; }
  Linear<T>& query() { return q_; }
  Linear<T>& key() { return k_; }
  Linear<T>& value() { return v_; }
  Linear<T>& output() { return o_; }
  const Linear<T>& query() const { return q_; }
  const Linear<T>& key() const { return k_; }
  const Linear<T>& value() const { return v_; }
  const Linear<T>& output() const { return o_; }

  void collect(const std::string& prefix, NamedParams<T>& out) const;

 private:
  num::Tensor<T> split_heads(const num::Tensor<T>& x) const;
  num::Tensor<T> merge_heads(const num::Tensor<T>& x) const;
  num::Tensor<T> attend(const num::Tensor<T>& q, const num::Tensor<T>& k,
                        const num::Tensor<T>& v, const num::Mask* mask, bool capture) const;

  std::size_t d_model_ = 0;
  std::size_t heads_ = 1;
  bool causal_ = false;
  bool capture_ = false;
  Linear<T> q_, k_, v_, o_;
  mutable num::Tensor<T> captured_;
};

/// Pre-norm block: x + attn(ln1(x)), then x + ffn(ln2(x)) with a GELU FFN.
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::size_t d_model, std::size_t heads, std::size_t ffn_mult, bool causal,
                   double dropout, num::Rng& rng);

  num::Tensor<T> forward(const num::Tensor<T>& x, const RunContext& ctx = {}) const;
  std::pair<num::Tensor<T>, num::Tensor<T>> forward_with_prefix(const num::Tensor<T>& prefix,
                                                                const num::Tensor<T>& body,
                                                                const RunContext& ctx = {}) const;

  MultiHeadAttention<T>& attention() { return attn_; }
  const MultiHeadAttention<T>& attention() const { return attn_; }
  LayerNormParams<T>& norm1() { return ln1_; }
  LayerNormParams<T>& norm2() { return ln2_; }
  Linear<T>& ffn_in() { return fc_in_; }
  Linear<T>& ffn_out() { return fc_out_; }

  /// Zeroes the attention output and FFN output projections so the block
  /// is an exact residual pass-through.
  void make_identity();

  void collect(const std::string& prefix, NamedParams<T>& out) const;

 private:
  num::Tensor<T> ffn(const num::Tensor<T>& x, const RunContext& ctx) const;
  num::Tensor<T> maybe_dropout(const num::Tensor<T>& x, const RunContext& ctx) const;

  LayerNormParams<T> ln1_, ln2_;
  MultiHeadAttention<T> attn_;
  Linear<T> fc_in_, fc_out_;
  double dropout_ = 0.0;
};

/// Copies values of every parameter in `from` whose name and shape match one
/// in `to`. Returns the number copied.
template <typename T>
std::size_t copy_matching(const NamedParams<T>& from, const NamedParams<T>& to);

/// Parameters with requires_grad set.
template <typename T>
std::vector<num::Tensor<T>> trainable(const NamedParams<T>& params);

}  // namespace semfuse::nn
