// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "semfuse/harness/config.hpp"

namespace semfuse::harness {

/// One (dataset, variant, horizon, seed) cell.
struct CellResult {
  std::string dataset;
  std::string variant;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t epochs_run = 0;
  std::string error;
  /// Prediction manifest, relative to the output directory.
  std::string predictions;
  double seconds = 0.0;
};

/// Seed average of the successful cells of one (dataset, variant, horizon).
struct AggregateRow {
  std::string dataset;
  std::string variant;
  std::size_t horizon = 0;
  std::size_t seeds_ok = 0;
  std::size_t seeds_total = 0;
  double mse = 0.0;
  double mae = 0.0;
};

struct MatrixReport {
  std::string fingerprint;
  std::vector<CellResult> cells;
  std::vector<AggregateRow> aggregates;
};

/// "<dataset>_<variant>_h<horizon>_s<seed>"
std::string run_name(const std::string& dataset, const std::string& variant, std::size_t horizon,
                     std::uint64_t seed);

std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells);

/// Trains and evaluates every variant x horizon x seed on the test split.
/// Per-cell failures are recorded and the matrix continues. Writes
/// results.csv, timing.csv, curve_<run>.csv, checkpoints/ and predictions/
/// under cfg.output_dir. Progress lines go to `log` when given.
MatrixReport run_matrix(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Per-seed rows followed by aggregate rows (seed column "mean"). Holds no
/// timing, so reruns compare byte for byte.
void write_results_csv(const MatrixReport& report, const std::filesystem::path& path);
void write_timing_csv(const MatrixReport& report, const std::filesystem::path& path);

/// Rebuilds the report of `dir` from its stored predictions and rewrites
/// results.csv. Cells that failed keep their recorded error.
MatrixReport regenerate_report(const std::filesystem::path& dir);

}  // namespace semfuse::harness
