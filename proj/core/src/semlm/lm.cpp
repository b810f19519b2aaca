// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/semlm/lm.hpp"

#include <algorithm>
#include <tuple>

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"

namespace semfuse::semlm {

using num::Tensor;

void LmConfig::validate() const {
  if (d_lm == 0 || layers == 0 || heads == 0 || vocab_size == 0 || max_positions == 0 ||
      ffn_mult == 0) {
    throw ConfigError("language-model dimensions must be positive");
  }
  if (d_lm % heads != 0) {
    throw ConfigError("d_lm " + std::to_string(d_lm) + " not divisible by lm_heads " +
                      std::to_string(heads));
  }
  if (lora_rank > 0 && lora_rank >= d_lm) {
    throw ConfigError("lora_rank " + std::to_string(lora_rank) + " must be below d_lm " +
                      std::to_string(d_lm));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("lm dropout must be in [0, 1)");
}

template <typename T>
GptLm<T>::GptLm(const LmConfig& cfg, num::Rng& rng) : cfg_(cfg), ln_f_(cfg.d_lm, cfg.ln_eps) {
  cfg_.validate();
  wte_ = Tensor<T>::zeros({cfg.vocab_size, cfg.d_lm}, true);
  rng.fill_truncated_normal(wte_.mutable_values(), 0.02);
  wpe_ = Tensor<T>::zeros({cfg.max_positions, cfg.d_lm}, true);
  rng.fill_truncated_normal(wpe_.mutable_values(), 0.02);
  blocks_.reserve(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks_.emplace_back(cfg.d_lm, cfg.heads, cfg.ffn_mult, true, cfg.dropout, rng);
    blocks_.back().norm1().eps = cfg.ln_eps;
    blocks_.back().norm2().eps = cfg.ln_eps;
  }
}

template <typename T>
Tensor<T> GptLm<T>::token_embeddings(std::span<const std::int64_t> ids) const {
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
      throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(cfg_.vocab_size));
    }
  }
  return num::embedding(wte_, ids);
}

template <typename T>
Tensor<T> GptLm<T>::add_positions(const Tensor<T>& e, std::size_t first) const {
  if (e.rank() != 3 || e.dim(2) != cfg_.d_lm) {
    throw DimensionError("lm input " + num::shape_str(e.shape()) + ", expected [B, L, " +
                         std::to_string(cfg_.d_lm) + "]");
  }
  const std::size_t len = e.dim(1);
  if (first + len > cfg_.max_positions) {
    throw CapacityError("sequence of " + std::to_string(first + len) +
                        " positions exceeds max_positions " + std::to_string(cfg_.max_positions));
  }
  if (len == 0) return e;
  return num::add(e, num::slice(wpe_, 0, first, first + len));
}

template <typename T>
Tensor<T> GptLm<T>::forward(const Tensor<T>& e, const nn::RunContext& ctx) const {
  Tensor<T> h = add_positions(e, 0);
  for (const auto& b : blocks_) h = b.forward(h, ctx);
  return ln_f_.forward(h);
}

template <typename T>
Tensor<T> GptLm<T>::forward_with_prefix(const Tensor<T>& prefix, const Tensor<T>& body,
                                        const nn::RunContext& ctx) const {
  if (prefix.rank() != 3 || prefix.dim(0) != 1) {
    throw DimensionError("shared prefix must be [1, Lp, d], got " +
                         num::shape_str(prefix.shape()));
  }
  const std::size_t lp = prefix.dim(1);
  Tensor<T> hp = add_positions(prefix, 0);
  Tensor<T> hb = add_positions(body, lp);
  for (const auto& b : blocks_) std::tie(hp, hb) = b.forward_with_prefix(hp, hb, ctx);
  return ln_f_.forward(hb);
}

template <typename T>
void GptLm<T>::freeze() {
  nn::NamedParams<T> params;
  collect("", params);
  for (auto& [name, t] : params) t.set_requires_grad(false);
}

template <typename T>
void GptLm<T>::attach_lora(std::size_t rank, double alpha, num::Rng& rng) {
  freeze();
  for (auto& b : blocks_) {
    b.attention().query().attach_lora(rank, alpha, rng);
    b.attention().value().attach_lora(rank, alpha, rng);
  }
}

template <typename T>
void GptLm<T>::set_capture(bool on) {
  for (auto& b : blocks_) b.attention().set_capture(on);
}

template <typename T>
void GptLm<T>::collect(const std::string& prefix, nn::NamedParams<T>& out) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  out.emplace_back(p + "wte.weight", wte_);
  out.emplace_back(p + "wpe.weight", wpe_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(p + "h." + std::to_string(i), out);
  }
  ln_f_.collect(p + "ln_f", out);
}

namespace {

template <typename T>
void assign(Tensor<T>& dst, const std::vector<float>& src) {
  auto v = dst.mutable_values();
  std::transform(src.begin(), src.end(), v.begin(), [](float f) { return static_cast<T>(f); });
}

template <typename T>
std::vector<float> to_f32(const Tensor<T>& t) {
  std::vector<float> out(t.numel());
  auto v = t.values();
  std::transform(v.begin(), v.end(), out.begin(), [](T x) { return static_cast<float>(x); });
  return out;
}

// Resolves `name` with or without the "transformer." prefix.
std::string resolve(const WeightManifest& m, const std::string& name) {
  if (m.contains(name)) return name;
  if (m.contains("transformer." + name)) return "transformer." + name;
  return name;
}

std::vector<float> load_checked(const WeightManifest& m, const std::string& name,
                                const num::Shape& shape) {
  return m.load(resolve(m, name), &shape);
}

}  // namespace

template <typename T>
void GptLm<T>::load_weights(const WeightManifest& m) {
  const std::size_t d = cfg_.d_lm, f = cfg_.ffn_mult * cfg_.d_lm;
  assign(wte_, load_checked(m, "wte.weight", {cfg_.vocab_size, d}));
  assign(wpe_, load_checked(m, "wpe.weight", {cfg_.max_positions, d}));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "h." + std::to_string(i) + ".";
    auto& b = blocks_[i];
    assign(b.norm1().gain, load_checked(m, p + "ln_1.weight", {d}));
    assign(b.norm1().bias, load_checked(m, p + "ln_1.bias", {d}));
    auto qkv_w = load_checked(m, p + "attn.c_attn.weight", {d, 3 * d});
    auto qkv_b = load_checked(m, p + "attn.c_attn.bias", {3 * d});
    nn::Linear<T>* parts[] = {&b.attention().query(), &b.attention().key(),
                              &b.attention().value()};
    for (std::size_t s = 0; s < 3; ++s) {
      auto w = parts[s]->weight().mutable_values();
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) w[r * d + c] = static_cast<T>(qkv_w[r * 3 * d + s * d + c]);
      }
      auto bias = parts[s]->bias().mutable_values();
      for (std::size_t c = 0; c < d; ++c) bias[c] = static_cast<T>(qkv_b[s * d + c]);
    }
    assign(b.attention().output().weight(), load_checked(m, p + "attn.c_proj.weight", {d, d}));
    assign(b.attention().output().bias(), load_checked(m, p + "attn.c_proj.bias", {d}));
    assign(b.norm2().gain, load_checked(m, p + "ln_2.weight", {d}));
    assign(b.norm2().bias, load_checked(m, p + "ln_2.bias", {d}));
    assign(b.ffn_in().weight(), load_checked(m, p + "mlp.c_fc.weight", {d, f}));
    assign(b.ffn_in().bias(), load_checked(m, p + "mlp.c_fc.bias", {f}));
    assign(b.ffn_out().weight(), load_checked(m, p + "mlp.c_proj.weight", {f, d}));
    assign(b.ffn_out().bias(), load_checked(m, p + "mlp.c_proj.bias", {d}));
  }
  assign(ln_f_.gain, load_checked(m, "ln_f.weight", {d}));
  assign(ln_f_.bias, load_checked(m, "ln_f.bias", {d}));
}

template <typename T>
void GptLm<T>::save_weights(const std::filesystem::path& index_path) const {
  const std::size_t d = cfg_.d_lm, f = cfg_.ffn_mult * cfg_.d_lm;
  std::vector<NamedArray> arrays;
  arrays.push_back({"wte.weight", wte_.shape(), to_f32(wte_)});
  arrays.push_back({"wpe.weight", wpe_.shape(), to_f32(wpe_)});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "h." + std::to_string(i) + ".";
    auto& b = const_cast<nn::TransformerBlock<T>&>(blocks_[i]);
    arrays.push_back({p + "ln_1.weight", {d}, to_f32(b.norm1().gain)});
    arrays.push_back({p + "ln_1.bias", {d}, to_f32(b.norm1().bias)});
    std::vector<float> qkv_w(d * 3 * d), qkv_b(3 * d);
    const nn::Linear<T>* parts[] = {&b.attention().query(), &b.attention().key(),
                                    &b.attention().value()};
    for (std::size_t s = 0; s < 3; ++s) {
      auto w = to_f32(parts[s]->merged_weight());
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) qkv_w[r * 3 * d + s * d + c] = w[r * d + c];
      }
      auto bias = to_f32(parts[s]->bias());
      std::copy(bias.begin(), bias.end(), qkv_b.begin() + static_cast<std::ptrdiff_t>(s * d));
    }
    arrays.push_back({p + "attn.c_attn.weight", {d, 3 * d}, std::move(qkv_w)});
    arrays.push_back({p + "attn.c_attn.bias", {3 * d}, std::move(qkv_b)});
    arrays.push_back({p + "attn.c_proj.weight", {d, d}, to_f32(b.attention().output().weight())});
    arrays.push_back({p + "attn.c_proj.bias", {d}, to_f32(b.attention().output().bias())});
    arrays.push_back({p + "ln_2.weight", {d}, to_f32(b.norm2().gain)});
    arrays.push_back({p + "ln_2.bias", {d}, to_f32(b.norm2().bias)});
    arrays.push_back({p + "mlp.c_fc.weight", {d, f}, to_f32(b.ffn_in().weight())});
    arrays.push_back({p + "mlp.c_fc.bias", {f}, to_f32(b.ffn_in().bias())});
    arrays.push_back({p + "mlp.c_proj.weight", {f, d}, to_f32(b.ffn_out().weight())});
    arrays.push_back({p + "mlp.c_proj.bias", {d}, to_f32(b.ffn_out().bias())});
  }
  arrays.push_back({"ln_f.weight", {d}, to_f32(ln_f_.gain)});
  arrays.push_back({"ln_f.bias", {d}, to_f32(ln_f_.bias)});
  WeightManifest::write(index_path, arrays,
                        {{"n_layer", std::to_string(cfg_.layers)},
                         {"n_head", std::to_string(cfg_.heads)},
                         {"n_embd", std::to_string(d)},
                         {"n_positions", std::to_string(cfg_.max_positions)},
                         {"vocab_size", std::to_string(cfg_.vocab_size)}});
}

template <typename T>
LmConfig GptLm<T>::config_from_manifest(const WeightManifest& m, std::size_t layers) {
  const auto* wte = m.find(resolve(m, "wte.weight"));
  const auto* wpe = m.find(resolve(m, "wpe.weight"));
  if (!wte || wte->shape.size() != 2) throw LoadError("tensor wte.weight missing or not rank 2");
  if (!wpe || wpe->shape.size() != 2) throw LoadError("tensor wpe.weight missing or not rank 2");
  LmConfig cfg;
  cfg.vocab_size = wte->shape[0];
  cfg.d_lm = wte->shape[1];
  cfg.max_positions = wpe->shape[0];
  cfg.layers = layers;
  const auto& meta = m.metadata();
  if (auto it = meta.find("n_head"); it != meta.end()) cfg.heads = std::stoul(it->second);
  std::size_t available = 0;
  while (m.contains(resolve(m, "h." + std::to_string(available) + ".ln_1.weight"))) ++available;
  if (available < layers) {
    throw LoadError("manifest has " + std::to_string(available) + " blocks, " +
                    std::to_string(layers) + " requested");
  }
  return cfg;
}

template class GptLm<float>;
template class GptLm<double>;

}  // namespace semfuse::semlm
