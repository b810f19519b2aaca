// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "semfuse/semlm/lm.hpp"
#include "semfuse/semlm/tokenizer.hpp"

namespace semfuse::semlm {

inline constexpr std::string_view kTaskPrompt =
    "This is a time series forecasting task. The input contains historical data patterns that "
    "need to be analyzed for future predictions.";
inline constexpr std::string_view kFeatPrompt =
    "The following are the encoded time series features extracted from the Transformer "
    "encoder, which represent the learned temporal patterns.";
inline constexpr std::string_view kDataPrompt =
    "The following are the original patch data features that provide additional context for "
    "the prediction task.";

struct PromptIds {
  std::vector<std::int64_t> task;
  std::vector<std::int64_t> feat;
  std::vector<std::int64_t> data;

  static PromptIds tokenize(const Tokenizer& tok);
  static PromptIds empty() { return {}; }
};

/// Block boundaries of [P_task, P_feat, E_Z, P_data, E_X, placeholders].
struct SequenceLayout {
  std::size_t task = 0;
  std::size_t feat = 0;
  std::size_t z = 0;
  std::size_t data = 0;
  std::size_t x = 0;
  std::size_t slots = 0;

  std::size_t z_begin() const { return task + feat; }
  std::size_t data_begin() const { return z_begin() + z; }
  std::size_t x_begin() const { return data_begin() + data; }
  std::size_t slots_begin() const { return x_begin() + x; }
  std::size_t total() const { return slots_begin() + slots; }
};

/// Concatenates the blocks along the sequence axis in prompt order. Each
/// block is [B, len, d] or [1, len, d] (broadcast over the batch); an
/// undefined tensor is an empty block. DimensionError on width mismatch.
template <typename T>
num::Tensor<T> assemble_input(const num::Tensor<T>& p_task, const num::Tensor<T>& p_feat,
                              const num::Tensor<T>& e_z, const num::Tensor<T>& p_data,
                              const num::Tensor<T>& e_x, SequenceLayout* layout = nullptr,
                              const num::Tensor<T>& slots = {});

/// Rows of the E_X block: [B, N, d]. ContractError when hidden does not
/// match the layout length.
template <typename T>
num::Tensor<T> extract_zllm(const num::Tensor<T>& hidden, const SequenceLayout& layout);

/// Rows of the placeholder block: [B, slots, d].
template <typename T>
num::Tensor<T> extract_slots(const num::Tensor<T>& hidden, const SequenceLayout& layout);

struct SemanticOptions {
  bool use_prompts = true;
  /// Prompt embeddings become trainable copies of their token-table rows.
  bool train_prompts = false;
  /// Build the Z^{l-1} -> d_lm projection. Off for encoders fed patches only.
  bool temporal_branch = true;
};

/// The LM-side encoder: projections of Z^{l-1} and the raw patches into the
/// LM width, prompt interleaving, the LM pass and extraction of Z_LLM.
template <typename T>
class SemanticEncoder {
 public:
  SemanticEncoder(const LmConfig& lm_cfg, std::size_t d_model, std::size_t patch_len,
                  const PromptIds& prompts, const SemanticOptions& opts, num::Rng& rng,
                  const WeightManifest* pretrained = nullptr);

  /// [B, N, d_model] -> [B, N, d_lm]
  num::Tensor<T> project_temporal(const num::Tensor<T>& z) const;
  /// [B, N, T] -> [B, N, d_lm]
  num::Tensor<T> project_patches(const num::Tensor<T>& x) const;

  /// Prompt block [1, len, d_lm]; undefined when the prompt is empty.
  num::Tensor<T> prompt_block(const std::vector<std::int64_t>& ids,
                              const num::Tensor<T>& trainable) const;
  num::Tensor<T> p_task() const { return prompt_block(prompts_.task, task_emb_); }
  num::Tensor<T> p_feat() const { return prompt_block(prompts_.feat, feat_emb_); }
  num::Tensor<T> p_data() const { return prompt_block(prompts_.data, data_emb_); }

  SequenceLayout layout(std::size_t n, bool temporal, std::size_t slots = 0) const;

  /// Z_LLM for a batch. z may be undefined when there is no temporal branch;
  /// E_Z and P_feat (which describes it) are then omitted.
  /// `slots` ([1 or B, n_slots, d_lm]) are appended after E_X; their hidden
  /// states are returned through `slot_out` when given.
  num::Tensor<T> encode(const num::Tensor<T>& z, const num::Tensor<T>& x,
                        const nn::RunContext& ctx = {}, const num::Tensor<T>& slots = {},
                        num::Tensor<T>* slot_out = nullptr) const;

  /// Same as encode() through the explicit assemble -> lm_forward -> extract path.
  num::Tensor<T> encode_reference(const num::Tensor<T>& z, const num::Tensor<T>& x,
                                  const nn::RunContext& ctx = {},
                                  const num::Tensor<T>& slots = {},
                                  num::Tensor<T>* slot_out = nullptr) const;

  GptLm<T>& lm() { return *lm_; }
  const GptLm<T>& lm() const { return *lm_; }
  nn::Linear<T>& temporal_projection() { return proj_z_; }
  nn::Linear<T>& patch_projection() { return proj_x_; }
  const PromptIds& prompts() const { return prompts_; }
  const SemanticOptions& options() const { return opts_; }

  void collect(const std::string& prefix, nn::NamedParams<T>& out) const;

 private:
  std::unique_ptr<GptLm<T>> lm_;
  nn::Linear<T> proj_z_;
  nn::Linear<T> proj_x_;
  PromptIds prompts_;
  SemanticOptions opts_;
  num::Tensor<T> task_emb_, feat_emb_, data_emb_;
};

}  // namespace semfuse::semlm
