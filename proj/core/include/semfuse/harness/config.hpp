// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/data/dataset.hpp"
#include "semfuse/variants/model.hpp"

namespace semfuse::harness {

/// One experiment: data, model shape, optimization and the run matrix axes.
struct ExperimentConfig {
  std::string dataset_path;
  std::string dataset_name;
  /// Unset means SplitRatios::for_dataset(dataset_name).
  std::optional<data::SplitRatios> split;

  std::size_t history_len = 336;
  std::vector<std::size_t> horizons{96, 192, 336, 720};
  patching::PatchConfig patch{16, 8};
  backbone::BackboneConfig backbone = backbone::BackboneConfig::general();
  semlm::LmConfig lm = semlm::LmConfig::tiny();
  std::vector<variants::VariantKind> variants{variants::VariantKind::kFused};

  bool scalar_gate = false;
  bool llm_only_prompts = false;
  bool per_slot_placeholders = false;
  bool train_prompts = false;
  std::string tokenizer_vocab;
  std::string tokenizer_merges;
  std::string lm_weights;

  std::size_t epochs = 300;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool deterministic = true;
  /// Stop after this many epochs without a validation improvement; 0 = off.
  std::size_t patience = 0;
  /// Offset between consecutive training windows; evaluation always uses 1.
  std::size_t train_stride = 1;
  double revin_eps = 1e-5;
  std::string output_dir = "runs";

  /// "general": T_x=336, T=16, S=8, d_model=16, heads=4.
  static ExperimentConfig general();
  /// "ili": T_x=104, T=24, S=2, d_model=128, heads=16.
  static ExperimentConfig ili();
  /// Throws ConfigError on unknown names.
  static ExperimentConfig preset(std::string_view name);

  data::SplitRatios split_ratios() const;
  variants::ModelSpec model_spec(std::size_t horizon) const;
  void validate() const;

  /// Canonical JSON text (sorted keys, no whitespace) and its FNV-1a hash.
  /// The fingerprint leaves out the output directory and the matrix axes
  /// (seeds, horizons, variants); checkpoints record variant and horizon.
  std::string to_json() const;
  std::string fingerprint() const;
};

/// Parses a JSON document. An optional "preset" key selects the starting
/// point; every other key overrides it. Unknown keys (at any depth) raise
/// ConfigError naming the key.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace semfuse::harness
