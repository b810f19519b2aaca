// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semfuse/nn/layers.hpp"
#include "semfuse/semlm/manifest.hpp"

namespace semfuse::semlm {

struct LmConfig {
  std::size_t d_lm = 768;
  std::size_t layers = 2;
  std::size_t heads = 12;
  std::size_t vocab_size = 50257;
  std::size_t max_positions = 1024;
  std::size_t lora_rank = 8;   // 0 disables adapters (LM fully frozen)
  double lora_alpha = 16.0;
  std::size_t ffn_mult = 4;
  double dropout = 0.0;
  double ln_eps = 1e-5;

  void validate() const;

  /// GPT-2 small truncated to two blocks.
  static LmConfig gpt2() { return {}; }
  /// Random-init desk-scale model over the byte vocabulary.
  static LmConfig tiny() { return {32, 2, 4, 256, 1024, 8, 16.0, 4, 0.0, 1e-5}; }
};

/// Decoder-only causal LM in the GPT-2 block layout. Input is a sequence of
/// d_lm embeddings; learned absolute positions are added internally.
///
/// Manifest names follow the GPT-2 checkpoint scheme: `wte.weight`,
/// `wpe.weight`, `h.{i}.ln_1.{weight,bias}`, `h.{i}.attn.c_attn.{weight,bias}`
/// (fused [d, 3d] query/key/value), `h.{i}.attn.c_proj.*`, `h.{i}.ln_2.*`,
/// `h.{i}.mlp.c_fc.*`, `h.{i}.mlp.c_proj.*`, `ln_f.*`. Matrices are stored
/// [in, out] (the GPT-2 Conv1D layout), which is also this library's layout,
/// so no transposition happens on load. A `transformer.` prefix is accepted.
template <typename T>
class GptLm {
 public:
  GptLm(const LmConfig& cfg, num::Rng& rng);

  /// Rows of the token table for `ids`: [ids.size(), d_lm].
  num::Tensor<T> token_embeddings(std::span<const std::int64_t> ids) const;

  /// e: [B, L, d_lm] -> final-norm hidden states [B, L, d_lm].
  num::Tensor<T> forward(const num::Tensor<T>& e, const nn::RunContext& ctx = {}) const;

  /// Same result as forward() on [prefix broadcast; body] but the prefix
  /// ([1, Lp, d]) is processed once for the whole batch. Returns hidden
  /// states of the body rows only.
  num::Tensor<T> forward_with_prefix(const num::Tensor<T>& prefix, const num::Tensor<T>& body,
                                     const nn::RunContext& ctx = {}) const;

  /// Freezes every base weight.
  void freeze();
  /// Freezes the base model and adds adapters to each layer's query and
  /// value projections.
  void attach_lora(std::size_t rank, double alpha, num::Rng& rng);

  /// Loads the first cfg.layers blocks; extra blocks in the manifest are
  /// ignored. LoadError names any missing or mis-shaped tensor.
  void load_weights(const WeightManifest& manifest);
  /// Writes this model (base weights, adapters merged) in the GPT-2 naming scheme.
  void save_weights(const std::filesystem::path& index_path) const;

  void set_capture(bool on);
  /// Attention weights captured by the last forward of block `layer`.
  const num::Tensor<T>& captured(std::size_t layer) const {
    return blocks_.at(layer).attention().captured();
  }

  const LmConfig& config() const { return cfg_; }
  num::Tensor<T>& token_table() { return wte_; }
  const num::Tensor<T>& token_table() const { return wte_; }
  nn::TransformerBlock<T>& block(std::size_t i) { return blocks_.at(i); }

  void collect(const std::string& prefix, nn::NamedParams<T>& out) const;

  /// Reads n_layer/n_head/n_embd/n_positions/vocab from manifest metadata and
  /// tensor shapes, truncating to `layers` blocks.
  static LmConfig config_from_manifest(const WeightManifest& manifest, std::size_t layers);

 private:
  num::Tensor<T> add_positions(const num::Tensor<T>& e, std::size_t first) const;

  LmConfig cfg_;
  num::Tensor<T> wte_;
  num::Tensor<T> wpe_;
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNormParams<T> ln_f_;
};

}  // namespace semfuse::semlm
