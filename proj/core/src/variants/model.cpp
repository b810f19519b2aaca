// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/variants/model.hpp"

#include <array>
#include <optional>

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"
#include "semfuse/semlm/manifest.hpp"
#include "semfuse/semlm/tokenizer.hpp"

namespace semfuse::variants {

using num::Tensor;

namespace {

constexpr std::array<std::pair<VariantKind, std::string_view>, 5> kNames{{
    {VariantKind::kFused, "fused"},
    {VariantKind::kTransOnly, "trans_only"},
    {VariantKind::kLlmOnly, "llm_only"},
    {VariantKind::kTransLlmAdd, "trans_llm_add"},
    {VariantKind::kLlmDecoder, "llm_decoder"},
}};

bool uses_backbone(VariantKind k) { return k != VariantKind::kLlmOnly; }
bool uses_lm(VariantKind k) { return k != VariantKind::kTransOnly; }

semlm::Tokenizer load_tokenizer(const ModelSpec& spec) {
  if (spec.tokenizer_vocab.empty() && spec.tokenizer_merges.empty()) {
    return semlm::Tokenizer::byte_fallback();
  }
  if (spec.tokenizer_vocab.empty() || spec.tokenizer_merges.empty()) {
    throw ConfigError("tokenizer needs both a vocabulary and a merges file");
  }
  return semlm::Tokenizer::from_files(spec.tokenizer_vocab, spec.tokenizer_merges);
}

}  // namespace

VariantKind parse_variant(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected fused, trans_only, llm_only, trans_llm_add or llm_decoder)");
}

std::string_view variant_name(VariantKind kind) {
  for (const auto& [k, n] : kNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

const std::vector<VariantKind>& all_variants() {
  static const std::vector<VariantKind> kAll{VariantKind::kFused, VariantKind::kTransOnly,
                                             VariantKind::kLlmOnly, VariantKind::kTransLlmAdd,
                                             VariantKind::kLlmDecoder};
  return kAll;
}

std::size_t ModelSpec::num_patches() const {
  return patching::patch_count(history_len, patch.patch_len, patch.stride);
}

std::size_t ModelSpec::decoder_slots() const {
  return (horizon + patch.patch_len - 1) / patch.patch_len;
}

void ModelSpec::validate() const {
  if (horizon == 0) throw ConfigError("horizon must be positive");
  patch.validate(history_len);
  backbone.validate();
  lm.validate();
}

template <typename T>
Forecaster<T>::Forecaster(VariantKind kind, const ModelSpec& spec, num::Rng& rng)
    : kind_(kind), spec_(spec), lm_cfg_(spec.lm) {
  spec_.validate();
  const std::size_t n = spec_.num_patches();
  const std::size_t t = spec_.patch.patch_len;

  std::optional<semlm::WeightManifest> manifest;
  if (uses_lm(kind) && !spec_.lm_weights.empty()) {
    manifest = semlm::WeightManifest::read(spec_.lm_weights);
    auto from_file = semlm::GptLm<T>::config_from_manifest(*manifest, spec_.lm.layers);
    from_file.lora_rank = spec_.lm.lora_rank;
    from_file.lora_alpha = spec_.lm.lora_alpha;
    from_file.dropout = spec_.lm.dropout;
    from_file.ln_eps = spec_.lm.ln_eps;
    from_file.ffn_mult = spec_.lm.ffn_mult;
    from_file.validate();
    lm_cfg_ = from_file;
  }

  if (uses_backbone(kind)) {
    backbone_ = std::make_unique<backbone::Backbone<T>>(
        spec_.backbone, n, t, spec_.horizon, rng, kind == VariantKind::kLlmDecoder);
  }
  if (uses_lm(kind)) {
    semlm::SemanticOptions opts;
    opts.train_prompts = spec_.train_prompts;
    if (kind == VariantKind::kLlmOnly) {
      opts.use_prompts = spec_.llm_only_prompts;
      opts.temporal_branch = false;
    }
    const auto prompts = semlm::PromptIds::tokenize(load_tokenizer(spec_));
    semantic_ = std::make_unique<semlm::SemanticEncoder<T>>(
        lm_cfg_, spec_.backbone.d_model, t, prompts, opts, rng,
        manifest ? &*manifest : nullptr);
    const std::size_t slots = kind == VariantKind::kLlmDecoder ? spec_.decoder_slots() : 0;
    const auto layout = semantic_->layout(n, kind != VariantKind::kLlmOnly, slots);
    if (layout.total() > lm_cfg_.max_positions) {
      throw CapacityError("variant " + std::string(variant_name(kind)) + " needs " +
                          std::to_string(layout.total()) + " LM positions, max_positions is " +
                          std::to_string(lm_cfg_.max_positions));
    }
  }
  if (kind == VariantKind::kFused || kind == VariantKind::kTransLlmAdd) {
    const auto mode = kind == VariantKind::kTransLlmAdd ? fusion::GateMode::kNone
                      : spec_.scalar_gate              ? fusion::GateMode::kScalar
                                                       : fusion::GateMode::kVector;
    fusion_ = std::make_unique<fusion::GatedFusion<T>>(lm_cfg_.d_lm, spec_.backbone.d_model,
                                                       mode, rng);
  }
  if (kind == VariantKind::kLlmOnly) {
    head_ = nn::Linear<T>(n * lm_cfg_.d_lm, spec_.horizon, true, rng);
  }
  if (kind == VariantKind::kLlmDecoder) {
    const std::size_t rows = spec_.per_slot_placeholders ? spec_.decoder_slots() : 1;
    placeholders_ = Tensor<T>::zeros({1, rows, lm_cfg_.d_lm}, true);
    rng.fill_truncated_normal(placeholders_.mutable_values(), 0.02);
    decoder_ = nn::Linear<T>(lm_cfg_.d_lm, t, true, rng);
  }
}

template <typename T>
ForwardTrace<T> Forecaster<T>::trace(const Tensor<T>& patches, const nn::RunContext& ctx) const {
  ForwardTrace<T> tr;
  const std::size_t batch = patches.dim(0);
  switch (kind_) {
    case VariantKind::kTransOnly:
      tr.z_lower = backbone_->forward_lower(patches, ctx);
      tr.z_last = backbone_->forward_upper(tr.z_lower, ctx);
      tr.pred = backbone_->forecast_head(tr.z_last);
      break;
    case VariantKind::kFused:
    case VariantKind::kTransLlmAdd: {
      tr.z_lower = backbone_->forward_lower(patches, ctx);
      tr.z_llm = semantic_->encode(tr.z_lower, patches, ctx);
      auto f = fusion_->forward(tr.z_llm, tr.z_lower);
      tr.aligned = f.aligned;
      tr.gate = f.gate;
      tr.fused = f.fused;
      tr.z_last = backbone_->forward_upper(tr.fused, ctx);
      tr.pred = backbone_->forecast_head(tr.z_last);
      break;
    }
    case VariantKind::kLlmOnly: {
      tr.z_llm = semantic_->encode(Tensor<T>(), patches, ctx);
      auto flat = num::reshape(tr.z_llm, {batch, tr.z_llm.dim(1) * tr.z_llm.dim(2)});
      tr.pred = head_.forward(flat);
      break;
    }
    case VariantKind::kLlmDecoder: {
      const std::size_t slots = spec_.decoder_slots();
      const std::size_t d = lm_cfg_.d_lm;
      auto ph = placeholders_.dim(1) == slots ? placeholders_
                                              : num::broadcast_to(placeholders_, {1, slots, d});
      tr.z_lower = backbone_->forward_lower(patches, ctx);
      Tensor<T> slot_hidden;
      tr.z_llm = semantic_->encode(tr.z_lower, patches, ctx, ph, &slot_hidden);
      auto pieces = decoder_.forward(slot_hidden);  // [B, N_y, T]
      auto flat = num::reshape(pieces, {batch, slots * spec_.patch.patch_len});
      tr.pred = flat.dim(1) == spec_.horizon ? flat : num::slice(flat, 1, 0, spec_.horizon);
      break;
    }
  }
  return tr;
}

template <typename T>
nn::NamedParams<T> Forecaster<T>::named_parameters() const {
  nn::NamedParams<T> out;
  if (backbone_) backbone_->collect("backbone", out);
  if (semantic_) semantic_->collect("semantic", out);
  if (fusion_) fusion_->collect("fusion", out);
  if (kind_ == VariantKind::kLlmOnly) head_.collect("head", out);
  if (kind_ == VariantKind::kLlmDecoder) {
    out.emplace_back("placeholders", placeholders_);
    decoder_.collect("decoder", out);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> Forecaster<T>::trainable_parameters() const {
  return nn::trainable(named_parameters());
}

template <typename T>
std::unique_ptr<Forecaster<T>> build_model(VariantKind kind, const ModelSpec& spec,
                                           std::uint64_t seed) {
  num::Rng rng(seed);
  return std::make_unique<Forecaster<T>>(kind, spec, rng);
}

template class Forecaster<float>;
template class Forecaster<double>;
template std::unique_ptr<Forecaster<float>> build_model(VariantKind, const ModelSpec&,
                                                        std::uint64_t);
template std::unique_ptr<Forecaster<double>> build_model(VariantKind, const ModelSpec&,
                                                         std::uint64_t);

}  // namespace semfuse::variants
