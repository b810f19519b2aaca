// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/semlm/semantic.hpp"

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"

namespace semfuse::semlm {

using num::Tensor;

PromptIds PromptIds::tokenize(const Tokenizer& tok) {
  return {tok.encode(kTaskPrompt), tok.encode(kFeatPrompt), tok.encode(kDataPrompt)};
}

namespace {

template <typename T>
std::size_t block_len(const Tensor<T>& t) {
  return t ? t.dim(1) : 0;
}

}  // namespace

template <typename T>
Tensor<T> assemble_input(const Tensor<T>& p_task, const Tensor<T>& p_feat, const Tensor<T>& e_z,
                         const Tensor<T>& p_data, const Tensor<T>& e_x, SequenceLayout* layout,
                         const Tensor<T>& slots) {
  const Tensor<T>* blocks[] = {&p_task, &p_feat, &e_z, &p_data, &e_x, &slots};
  std::size_t batch = 1, width = 0;
  for (const auto* b : blocks) {
    if (!*b) continue;
    if (b->rank() != 3) {
      throw DimensionError("sequence block must be rank 3, got " + num::shape_str(b->shape()));
    }
    if (width == 0) width = b->dim(2);
    if (b->dim(2) != width) {
      throw DimensionError("sequence blocks differ in width: " + std::to_string(width) + " vs " +
                           std::to_string(b->dim(2)));
    }
    if (b->dim(0) != 1) {
      if (batch != 1 && batch != b->dim(0)) throw DimensionError("sequence blocks differ in batch");
      batch = b->dim(0);
    }
  }
  if (width == 0) throw ContractError("assemble_input with no blocks");
  std::vector<Tensor<T>> parts;
  for (const auto* b : blocks) {
    if (!*b || b->dim(1) == 0) continue;
    parts.push_back(b->dim(0) == batch ? *b : num::broadcast_to(*b, {batch, b->dim(1), width}));
  }
  if (layout) {
    *layout = {block_len(p_task), block_len(p_feat), block_len(e_z),
               block_len(p_data), block_len(e_x),    block_len(slots)};
  }
  return num::concat(parts, 1);
}

template <typename T>
Tensor<T> extract_zllm(const Tensor<T>& hidden, const SequenceLayout& layout) {
  if (hidden.rank() != 3 || hidden.dim(1) != layout.total()) {
    throw ContractError("hidden states " + num::shape_str(hidden.shape()) +
                        " do not match a layout of " + std::to_string(layout.total()) +
                        " positions");
  }
  return num::slice(hidden, 1, layout.x_begin(), layout.x_begin() + layout.x);
}

template <typename T>
Tensor<T> extract_slots(const Tensor<T>& hidden, const SequenceLayout& layout) {
  if (hidden.rank() != 3 || hidden.dim(1) != layout.total()) {
    throw ContractError("hidden states " + num::shape_str(hidden.shape()) +
                        " do not match a layout of " + std::to_string(layout.total()) +
                        " positions");
  }
  return num::slice(hidden, 1, layout.slots_begin(), layout.total());
}

template <typename T>
SemanticEncoder<T>::SemanticEncoder(const LmConfig& lm_cfg, std::size_t d_model,
                                    std::size_t patch_len, const PromptIds& prompts,
                                    const SemanticOptions& opts, num::Rng& rng,
                                    const WeightManifest* pretrained)
    : lm_(std::make_unique<GptLm<T>>(lm_cfg, rng)),
      proj_x_(patch_len, lm_cfg.d_lm, true, rng),
      prompts_(opts.use_prompts ? prompts : PromptIds::empty()),
      opts_(opts) {
  if (opts.temporal_branch) proj_z_ = nn::Linear<T>(d_model, lm_cfg.d_lm, true, rng);
  if (pretrained) lm_->load_weights(*pretrained);
  if (lm_cfg.lora_rank > 0) {
    lm_->attach_lora(lm_cfg.lora_rank, lm_cfg.lora_alpha, rng);
  } else {
    lm_->freeze();
  }
  if (opts.train_prompts) {
    auto copy = [&](const std::vector<std::int64_t>& ids) {
      if (ids.empty()) return Tensor<T>();
      auto rows = lm_->token_embeddings(ids).detach();
      rows.set_requires_grad(true);
      return rows;
    };
    task_emb_ = copy(prompts_.task);
    feat_emb_ = copy(prompts_.feat);
    data_emb_ = copy(prompts_.data);
  }
}

template <typename T>
Tensor<T> SemanticEncoder<T>::project_temporal(const Tensor<T>& z) const {
  if (!opts_.temporal_branch) throw CapabilityError("semantic encoder has no temporal branch");
  return proj_z_.forward(z);
}

template <typename T>
Tensor<T> SemanticEncoder<T>::project_patches(const Tensor<T>& x) const {
  return proj_x_.forward(x);
}

template <typename T>
Tensor<T> SemanticEncoder<T>::prompt_block(const std::vector<std::int64_t>& ids,
                                           const Tensor<T>& trainable) const {
  if (ids.empty()) return {};
  auto rows = trainable ? trainable : lm_->token_embeddings(ids);
  return num::reshape(rows, {1, ids.size(), lm_->config().d_lm});
}

template <typename T>
SequenceLayout SemanticEncoder<T>::layout(std::size_t n, bool temporal, std::size_t slots) const {
  return {prompts_.task.size(), temporal ? prompts_.feat.size() : 0, temporal ? n : 0,
          prompts_.data.size(), n,                                  slots};
}

template <typename T>
Tensor<T> SemanticEncoder<T>::encode(const Tensor<T>& z, const Tensor<T>& x,
                                     const nn::RunContext& ctx, const Tensor<T>& slots,
                                     Tensor<T>* slot_out) const {
  const bool temporal = z.defined();
  const std::size_t batch = x.dim(0), n = x.dim(1), d = lm_->config().d_lm;
  const auto lay = layout(n, temporal, slots ? slots.dim(1) : 0);
  if (lay.total() > lm_->config().max_positions) {
    throw CapacityError("assembled sequence of " + std::to_string(lay.total()) +
                        " positions exceeds max_positions " +
                        std::to_string(lm_->config().max_positions));
  }
  // Shared prefix [P_task; P_feat], per-row body [E_Z; P_data; E_X; slots].
  std::vector<Tensor<T>> prefix_parts;
  if (auto t = p_task()) prefix_parts.push_back(t);
  if (temporal) {
    if (auto f = p_feat()) prefix_parts.push_back(f);
  }
  Tensor<T> prefix = prefix_parts.empty() ? Tensor<T>::zeros({1, 0, d})
                                          : num::concat(prefix_parts, 1);
  std::vector<Tensor<T>> body_parts;
  if (temporal) body_parts.push_back(project_temporal(z));
  if (auto p = p_data()) body_parts.push_back(num::broadcast_to(p, {batch, p.dim(1), d}));
  body_parts.push_back(project_patches(x));
  if (slots) {
    body_parts.push_back(slots.dim(0) == batch ? slots
                                               : num::broadcast_to(slots, {batch, slots.dim(1), d}));
  }
  auto body = num::concat(body_parts, 1);
  auto hidden = lm_->forward_with_prefix(prefix, body, ctx);
  const std::size_t x_at = lay.x_begin() - lay.z_begin();
  if (slot_out) *slot_out = num::slice(hidden, 1, x_at + n, hidden.dim(1));
  return num::slice(hidden, 1, x_at, x_at + n);
}

template <typename T>
Tensor<T> SemanticEncoder<T>::encode_reference(const Tensor<T>& z, const Tensor<T>& x,
                                               const nn::RunContext& ctx, const Tensor<T>& slots,
                                               Tensor<T>* slot_out) const {
  const bool temporal = z.defined();
  SequenceLayout lay;
  auto e = assemble_input(p_task(), temporal ? p_feat() : Tensor<T>(),
                          temporal ? project_temporal(z) : Tensor<T>(), p_data(),
                          project_patches(x), &lay, slots);
  auto hidden = lm_->forward(e, ctx);
  if (slot_out) *slot_out = extract_slots(hidden, lay);
  return extract_zllm(hidden, lay);
}

template <typename T>
void SemanticEncoder<T>::collect(const std::string& prefix, nn::NamedParams<T>& out) const {
  lm_->collect(prefix + ".lm", out);
  if (opts_.temporal_branch) proj_z_.collect(prefix + ".proj_temporal", out);
  proj_x_.collect(prefix + ".proj_patches", out);
  if (task_emb_) out.emplace_back(prefix + ".prompt_task", task_emb_);
  if (feat_emb_) out.emplace_back(prefix + ".prompt_feat", feat_emb_);
  if (data_emb_) out.emplace_back(prefix + ".prompt_data", data_emb_);
}

#define SEMFUSE_INSTANTIATE(T)                                                                \
  template Tensor<T> assemble_input(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    const Tensor<T>&, const Tensor<T>&, SequenceLayout*,      \
                                    const Tensor<T>&);                                        \
  template Tensor<T> extract_zllm(const Tensor<T>&, const SequenceLayout&);                   \
  template Tensor<T> extract_slots(const Tensor<T>&, const SequenceLayout&);                  \
  template class SemanticEncoder<T>;

SEMFUSE_INSTANTIATE(float)
SEMFUSE_INSTANTIATE(double)

#undef SEMFUSE_INSTANTIATE

}  // namespace semfuse::semlm
