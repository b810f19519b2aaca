// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

// File exports consumed by the plotting scripts. Windows are addressed by
// their index in the stride-1, channel-major enumeration of the test split.

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "semfuse/data/dataset.hpp"
#include "semfuse/harness/config.hpp"
#include "semfuse/harness/training.hpp"

namespace semfuse::harness {

std::vector<data::SeriesWindow> test_windows(const ExperimentConfig& cfg,
                                             const data::SeriesDataset& ds, std::size_t horizon);

/// attn_<window>.json: per-head attention of the last backbone layer
/// ([H, N, N]) and of the last LM layer restricted to patch rows and columns.
/// CapabilityError unless the model has a full backbone and an LM.
///
/// Schema: {"format": "semfuse-attn-v1", "window", "channel", "origin",
/// "variant", "num_patches", "maps": [{"source": "backbone"|"llm", "layer"
/// (1-based), "heads", "causal", "row_axis", "col_axis", "shape",
/// "weights": [head][row][col]}]}
void export_attention(Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                      std::size_t window, const std::filesystem::path& out);

/// embeddings.csv: `label,window,patch,f0..f{d_model-1}` with Z^{l-1} rows
/// labeled "transformer" and aligned Z_LLM' rows labeled "llm".
/// CapabilityError unless the model has a fusion module.
void export_embeddings(const Model& model, const ExperimentConfig& cfg,
                       const data::SeriesDataset& ds, const std::vector<std::size_t>& windows,
                       const std::filesystem::path& out);

/// forecast_<window>.csv: `t,series,value` where series is history, target
/// or prediction and values are in the original data units.
void forecast_dump(const Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                   std::size_t window, const std::filesystem::path& out);

}  // namespace semfuse::harness
