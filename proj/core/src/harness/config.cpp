// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "semfuse/errors.hpp"

namespace semfuse::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok |= (k == key);
    if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename V>
void read(const json& obj, const char* key, V& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<V>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + key + "': " + e.what());
  }
}

json patch_json(const patching::PatchConfig& p) {
  return {{"len", p.patch_len}, {"stride", p.stride}};
}

json backbone_json(const backbone::BackboneConfig& b) {
  return {{"d_model", b.d_model},
          {"heads", b.heads},
          {"layers", b.layers},
          {"fusion_after_layer", b.fusion_after_layer},
          {"ffn_mult", b.ffn_mult},
          {"dropout", b.dropout}};
}

json lm_json(const semlm::LmConfig& l) {
  return {{"d_lm", l.d_lm},
          {"layers", l.layers},
          {"heads", l.heads},
          {"vocab_size", l.vocab_size},
          {"max_positions", l.max_positions},
          {"lora_rank", l.lora_rank},
          {"lora_alpha", l.lora_alpha},
          {"ffn_mult", l.ffn_mult},
          {"dropout", l.dropout},
          {"ln_eps", l.ln_eps}};
}

}  // namespace

ExperimentConfig ExperimentConfig::general() { return {}; }

ExperimentConfig ExperimentConfig::ili() {
  ExperimentConfig cfg;
  cfg.history_len = 104;
  cfg.patch = {24, 2};
  cfg.backbone = backbone::BackboneConfig::ili();
  cfg.horizons = {24, 36, 48, 60};
  return cfg;
}

ExperimentConfig ExperimentConfig::preset(std::string_view name) {
  if (name == "general") return general();
  if (name == "ili") return ili();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected general or ili)");
}

data::SplitRatios ExperimentConfig::split_ratios() const {
  return split ? *split : data::SplitRatios::for_dataset(dataset_name);
}

variants::ModelSpec ExperimentConfig::model_spec(std::size_t horizon) const {
  variants::ModelSpec spec;
  spec.history_len = history_len;
  spec.horizon = horizon;
  spec.patch = patch;
  spec.backbone = backbone;
  spec.lm = lm;
  spec.scalar_gate = scalar_gate;
  spec.llm_only_prompts = llm_only_prompts;
  spec.per_slot_placeholders = per_slot_placeholders;
  spec.train_prompts = train_prompts;
  spec.tokenizer_vocab = tokenizer_vocab;
  spec.tokenizer_merges = tokenizer_merges;
  spec.lm_weights = lm_weights;
  return spec;
}

void ExperimentConfig::validate() const {
  if (horizons.empty()) throw ConfigError("horizons must not be empty");
  if (variants.empty()) throw ConfigError("variants must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (train_stride == 0) throw ConfigError("train_stride must be positive");
  if (!(revin_eps > 0.0)) throw ConfigError("revin_eps must be positive");
  split_ratios().validate();
  for (auto h : horizons) model_spec(h).validate();
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["dataset_path"] = dataset_path;
  j["dataset_name"] = dataset_name;
  const auto r = split_ratios();
  j["split"] = {r.train, r.val, r.test};
  j["history_len"] = history_len;
  j["horizons"] = horizons;
  j["patch"] = patch_json(patch);
  j["backbone"] = backbone_json(backbone);
  j["lm"] = lm_json(lm);
  std::vector<std::string> kinds;
  for (auto k : variants) kinds.emplace_back(variants::variant_name(k));
  j["variants"] = kinds;
  j["scalar_gate"] = scalar_gate;
  j["llm_only_prompts"] = llm_only_prompts;
  j["per_slot_placeholders"] = per_slot_placeholders;
  j["train_prompts"] = train_prompts;
  j["tokenizer_vocab"] = tokenizer_vocab;
  j["tokenizer_merges"] = tokenizer_merges;
  j["lm_weights"] = lm_weights;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["seeds"] = seeds;
  j["deterministic"] = deterministic;
  j["patience"] = patience;
  j["train_stride"] = train_stride;
  j["revin_eps"] = revin_eps;
  j["output_dir"] = output_dir;
  return j.dump();
}

std::string ExperimentConfig::fingerprint() const {
  auto j = json::parse(to_json());
  j.erase("output_dir");
  j.erase("seeds");
  j.erase("horizons");
  j.erase("variants");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"preset", "dataset_path", "dataset_name", "split", "history_len", "horizons",
                  "patch", "backbone", "lm", "variants", "scalar_gate", "llm_only_prompts",
                  "per_slot_placeholders", "train_prompts", "tokenizer_vocab",
                  "tokenizer_merges", "lm_weights", "epochs", "learning_rate", "batch_size",
                  "seeds", "deterministic", "patience", "train_stride", "revin_eps",
                  "output_dir"},
                 "");
  std::string preset = "general";
  read(j, "preset", preset, "");
  ExperimentConfig cfg = ExperimentConfig::preset(preset);

  read(j, "dataset_path", cfg.dataset_path, "");
  read(j, "dataset_name", cfg.dataset_name, "");
  if (j.contains("split")) {
    std::vector<double> r;
    read(j, "split", r, "");
    if (r.size() != 3) throw ConfigError("config key 'split' needs [train, val, test]");
    cfg.split = data::SplitRatios{r[0], r[1], r[2]};
  }
  read(j, "history_len", cfg.history_len, "");
  read(j, "horizons", cfg.horizons, "");
  if (auto it = j.find("patch"); it != j.end()) {
    reject_unknown(*it, {"len", "stride"}, "patch.");
    read(*it, "len", cfg.patch.patch_len, "patch.");
    read(*it, "stride", cfg.patch.stride, "patch.");
  }
  if (auto it = j.find("backbone"); it != j.end()) {
    const std::string w = "backbone.";
    reject_unknown(*it, {"d_model", "heads", "layers", "fusion_after_layer", "ffn_mult", "dropout"},
                   w);
    auto& b = cfg.backbone;
    read(*it, "d_model", b.d_model, w);
    read(*it, "heads", b.heads, w);
    read(*it, "layers", b.layers, w);
    read(*it, "fusion_after_layer", b.fusion_after_layer, w);
    read(*it, "ffn_mult", b.ffn_mult, w);
    read(*it, "dropout", b.dropout, w);
  }
  if (auto it = j.find("lm"); it != j.end()) {
    const std::string w = "lm.";
    reject_unknown(*it,
                   {"preset", "d_lm", "layers", "heads", "vocab_size", "max_positions",
                    "lora_rank", "lora_alpha", "ffn_mult", "dropout", "ln_eps"},
                   w);
    std::string lm_preset;
    read(*it, "preset", lm_preset, w);
    if (lm_preset == "gpt2") {
      cfg.lm = semlm::LmConfig::gpt2();
    } else if (lm_preset == "tiny") {
      cfg.lm = semlm::LmConfig::tiny();
    } else if (!lm_preset.empty()) {
      throw ConfigError("unknown lm preset '" + lm_preset + "' (expected gpt2 or tiny)");
    }
    auto& l = cfg.lm;
    read(*it, "d_lm", l.d_lm, w);
    read(*it, "layers", l.layers, w);
    read(*it, "heads", l.heads, w);
    read(*it, "vocab_size", l.vocab_size, w);
    read(*it, "max_positions", l.max_positions, w);
    read(*it, "lora_rank", l.lora_rank, w);
    read(*it, "lora_alpha", l.lora_alpha, w);
    read(*it, "ffn_mult", l.ffn_mult, w);
    read(*it, "dropout", l.dropout, w);
    read(*it, "ln_eps", l.ln_eps, w);
  }
  if (j.contains("variants")) {
    std::vector<std::string> names;
    read(j, "variants", names, "");
    cfg.variants.clear();
    for (const auto& n : names) cfg.variants.push_back(variants::parse_variant(n));
  }
  read(j, "scalar_gate", cfg.scalar_gate, "");
  read(j, "llm_only_prompts", cfg.llm_only_prompts, "");
  read(j, "per_slot_placeholders", cfg.per_slot_placeholders, "");
  read(j, "train_prompts", cfg.train_prompts, "");
  read(j, "tokenizer_vocab", cfg.tokenizer_vocab, "");
  read(j, "tokenizer_merges", cfg.tokenizer_merges, "");
  read(j, "lm_weights", cfg.lm_weights, "");
  read(j, "epochs", cfg.epochs, "");
  read(j, "learning_rate", cfg.learning_rate, "");
  read(j, "batch_size", cfg.batch_size, "");
  read(j, "seeds", cfg.seeds, "");
  read(j, "deterministic", cfg.deterministic, "");
  read(j, "patience", cfg.patience, "");
  read(j, "train_stride", cfg.train_stride, "");
  read(j, "revin_eps", cfg.revin_eps, "");
  read(j, "output_dir", cfg.output_dir, "");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace semfuse::harness
