// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/backbone/backbone.hpp"
#include "semfuse/fusion/fusion.hpp"
#include "semfuse/patching/patching.hpp"
#include "semfuse/semlm/lm.hpp"
#include "semfuse/semlm/semantic.hpp"

namespace semfuse::variants {

enum class VariantKind {
  kFused,        // backbone lower -> LM -> gated fusion -> backbone upper -> head
  kTransOnly,    // backbone alone
  kLlmOnly,      // patches -> LM -> flatten -> linear head
  kTransLlmAdd,  // fused wiring with Z_E = Z_LLM' + Z (no gate)
  kLlmDecoder,   // backbone lower -> LM with placeholder slots -> per-slot linear
};

/// Accepts the names printed by variant_name(); ConfigError otherwise.
VariantKind parse_variant(std::string_view name);
std::string_view variant_name(VariantKind kind);
const std::vector<VariantKind>& all_variants();

/// Everything needed to build any variant.
struct ModelSpec {
  std::size_t history_len = 336;
  std::size_t horizon = 96;
  patching::PatchConfig patch;
  backbone::BackboneConfig backbone;
  semlm::LmConfig lm = semlm::LmConfig::tiny();
  bool scalar_gate = false;
  bool llm_only_prompts = false;
  bool per_slot_placeholders = false;
  bool train_prompts = false;
  /// GPT-2 vocab.json / merges.txt; empty means the byte-level fallback.
  std::string tokenizer_vocab;
  std::string tokenizer_merges;
  /// Weight manifest index for the LM; empty means random init. When set,
  /// the LM width, heads, vocabulary and positions come from the manifest
  /// and only `lm.layers`, the LoRA settings and dropout are kept.
  std::string lm_weights;

  std::size_t num_patches() const;
  /// ceil(horizon / patch_len).
  std::size_t decoder_slots() const;
  void validate() const;
};

/// Intermediate tensors of one forward pass. Members a variant does not
/// compute stay undefined.
template <typename T>
struct ForwardTrace {
  num::Tensor<T> z_lower;  // Z^{l-1}      [B, N, d_model]
  num::Tensor<T> z_llm;    // Z_LLM        [B, N, d_lm]
  num::Tensor<T> aligned;  // Z_LLM'       [B, N, d_model]
  num::Tensor<T> gate;     // g
  num::Tensor<T> fused;    // Z_E^{l-1}
  num::Tensor<T> z_last;   // Z^L
  num::Tensor<T> pred;     // [B, T_y]
};

/// One forecasting model. Input is RevIN-normalized patches [B, N, T];
/// output is the normalized forecast [B, T_y].
template <typename T>
class Forecaster {
 public:
  /// Draws parameters from `rng` in the order backbone, semantic encoder,
  /// fusion, output layers. Components the variant does not use are not built.
  Forecaster(VariantKind kind, const ModelSpec& spec, num::Rng& rng);

  ForwardTrace<T> trace(const num::Tensor<T>& patches, const nn::RunContext& ctx = {}) const;
  num::Tensor<T> forward(const num::Tensor<T>& patches, const nn::RunContext& ctx = {}) const {
    return trace(patches, ctx).pred;
  }

  VariantKind kind() const { return kind_; }
  const ModelSpec& spec() const { return spec_; }
  /// Effective LM configuration (after reading a manifest, if any).
  const semlm::LmConfig& lm_config() const { return lm_cfg_; }

  backbone::Backbone<T>* backbone() { return backbone_.get(); }
  const backbone::Backbone<T>* backbone() const { return backbone_.get(); }
  semlm::SemanticEncoder<T>* semantic() { return semantic_.get(); }
  const semlm::SemanticEncoder<T>* semantic() const { return semantic_.get(); }
  fusion::GatedFusion<T>* fusion() { return fusion_.get(); }
  const fusion::GatedFusion<T>* fusion() const { return fusion_.get(); }

  /// Every parameter, frozen ones included, under stable names.
  nn::NamedParams<T> named_parameters() const;
  /// The subset that requires grad.
  std::vector<num::Tensor<T>> trainable_parameters() const;

 private:
  VariantKind kind_;
  ModelSpec spec_;
  semlm::LmConfig lm_cfg_;
  std::unique_ptr<backbone::Backbone<T>> backbone_;
  std::unique_ptr<semlm::SemanticEncoder<T>> semantic_;
  std::unique_ptr<fusion::GatedFusion<T>> fusion_;
  nn::Linear<T> head_;            // llm_only: [N * d_lm, T_y]
  nn::Linear<T> decoder_;         // llm_decoder: [d_lm, T]
  num::Tensor<T> placeholders_;   // llm_decoder: [1, 1 or N_y, d_lm]
};

/// Builds a model with a fresh Rng(seed).
template <typename T>
std::unique_ptr<Forecaster<T>> build_model(VariantKind kind, const ModelSpec& spec,
                                           std::uint64_t seed);

}  // namespace semfuse::variants
