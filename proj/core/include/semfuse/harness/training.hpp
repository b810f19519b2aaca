// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "semfuse/data/dataset.hpp"
#include "semfuse/data/revin.hpp"
#include "semfuse/harness/config.hpp"
#include "semfuse/harness/metrics.hpp"
#include "semfuse/variants/model.hpp"

namespace semfuse::harness {

/// Training and evaluation run in single precision.
using Model = variants::Forecaster<float>;

/// Loads the CSV, applies the split ratios and the train-split Z-score.
/// Every split must hold at least history_len + horizon steps.
data::SeriesDataset prepare_dataset(const ExperimentConfig& cfg, std::size_t horizon);

/// RevIN-normalized patches for a set of windows plus what is needed to map
/// predictions back to Z-score space.
struct Batch {
  num::Tensor<float> patches;  // [B, N, T]
  num::Tensor<float> mean;     // [B, 1]
  num::Tensor<float> scale;    // [B, 1]
  num::Tensor<float> target;   // [B, T_y], Z-score space
  std::vector<data::RevinStats> stats;
};

Batch make_batch(std::span<const data::SeriesWindow> windows, std::span<const std::size_t> which,
                 const patching::PatchConfig& patch, double revin_eps);

/// pred * scale + mean, row-wise.
num::Tensor<float> denormalize(const num::Tensor<float>& pred, const Batch& batch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochRecord> curve;
  bool stopped_early = false;
};

/// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Shuffled mini-batch Adam on the MSE between denormalized predictions and
/// targets. Throws NumericalError on a non-finite loss.
TrainResult train(const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                  variants::VariantKind kind, std::size_t horizon, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

struct EvalResult {
  Metrics metrics;
  std::size_t windows = 0;
  /// Row-major [windows, T_y], only filled when requested.
  std::vector<float> predictions;
  std::vector<float> targets;
};

/// Stride-1 windows of `split`. Targets are rounded to float before the
/// metrics so that stored predictions reproduce them exactly.
EvalResult evaluate(const Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                    data::Split split, bool keep_predictions = false);

/// Predictions in Z-score space for the given windows, [windows.size(), T_y].
std::vector<float> predict(const Model& model, const ExperimentConfig& cfg,
                           std::span<const data::SeriesWindow> windows);

/// Every parameter (frozen LM weights included) in a weight manifest, with
/// the variant, horizon and config fingerprint in its metadata.
void save_checkpoint(const Model& model, const ExperimentConfig& cfg,
                     const std::filesystem::path& index);
/// CompatibilityError when the checkpoint was written for another variant,
/// horizon or config, or when a parameter is missing or mis-shaped.
std::unique_ptr<Model> load_checkpoint(const ExperimentConfig& cfg, variants::VariantKind kind,
                                       std::size_t horizon, const std::filesystem::path& index);

void write_curve_csv(const std::vector<EpochRecord>& curve, const std::filesystem::path& path);

}  // namespace semfuse::harness
