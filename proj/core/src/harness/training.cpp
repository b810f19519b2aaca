// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/harness/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "semfuse/backbone/backbone.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/numerics/autograd.hpp"
#include "semfuse/numerics/ops.hpp"
#include "semfuse/numerics/optim.hpp"
#include "semfuse/semlm/manifest.hpp"

namespace semfuse::harness {

using num::Tensor;

data::SeriesDataset prepare_dataset(const ExperimentConfig& cfg, std::size_t horizon) {
  if (cfg.dataset_path.empty()) throw ConfigError("no dataset path configured");
  auto raw = data::load_csv(cfg.dataset_path);
  auto split = raw.with_splits(cfg.split_ratios(), cfg.history_len + horizon);
  return data::zscore_fit_apply(split);
}

Batch make_batch(std::span<const data::SeriesWindow> windows, std::span<const std::size_t> which,
                 const patching::PatchConfig& patch, double revin_eps) {
  if (which.empty()) throw ContractError("empty batch");
  const std::size_t b = which.size();
  const std::size_t horizon = windows[which[0]].target.size();
  std::vector<std::vector<double>> histories;
  histories.reserve(b);
  Batch out;
  out.stats.reserve(b);
  std::vector<float> mean(b), scale(b), target;
  target.reserve(b * horizon);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& w = windows[which[i]];
    auto [normed, stats] = data::revin_normalize(w.history, revin_eps);
    histories.push_back(std::move(normed));
    mean[i] = static_cast<float>(stats.mean);
    scale[i] = static_cast<float>(stats.scale());
    out.stats.push_back(stats);
    for (double v : w.target) target.push_back(static_cast<float>(v));
  }
  out.patches = patching::patch_batch<float>(histories, patch);
  out.mean = Tensor<float>::from({b, 1}, std::move(mean));
  out.scale = Tensor<float>::from({b, 1}, std::move(scale));
  out.target = Tensor<float>::from({b, horizon}, std::move(target));
  return out;
}

Tensor<float> denormalize(const Tensor<float>& pred, const Batch& batch) {
  return num::add(num::mul(pred, batch.scale), batch.mean);
}

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double mean_loss(const Model& model, const ExperimentConfig& cfg,
                 std::span<const data::SeriesWindow> windows) {
  num::NoGradGuard guard;
  MetricAccumulator acc;
  const auto all = iota_indices(windows.size());
  for (std::size_t begin = 0; begin < all.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(all.size(), begin + cfg.batch_size);
    std::span<const std::size_t> which(all.data() + begin, end - begin);
    auto batch = make_batch(windows, which, cfg.patch, cfg.revin_eps);
    auto pred = denormalize(model.forward(batch.patches), batch);
    acc.add(pred.values(), batch.target.values());
  }
  return acc.result().mse;
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                  variants::VariantKind kind, std::size_t horizon, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  TrainResult result;
  result.model = variants::build_model<float>(kind, cfg.model_spec(horizon), seed);
  auto& model = *result.model;

  const auto train_windows =
      data::make_windows(ds, data::Split::kTrain, cfg.history_len, horizon, cfg.train_stride);
  const auto val_windows = data::make_windows(ds, data::Split::kVal, cfg.history_len, horizon);

  num::Adam<float> adam(model.trainable_parameters(), {cfg.learning_rate});
  num::Rng run_rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  const nn::RunContext ctx{true, &run_rng};

  auto order = iota_indices(train_windows.size());
  double best_val = INFINITY;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), run_rng.engine());
    double loss_sum = 0.0;
    std::size_t seen = 0, batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const std::size_t> which(order.data() + begin, end - begin);
      auto batch = make_batch(train_windows, which, cfg.patch, cfg.revin_eps);
      auto pred = denormalize(model.forward(batch.patches, ctx), batch);
      auto loss = backbone::mse_loss(pred, batch.target);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << batch_no
            << " (variant " << variants::variant_name(kind) << ", learning rate "
            << cfg.learning_rate << "; a lower learning rate may help)";
        throw NumericalError(msg.str());
      }
      num::backward(loss);
      adam.step();
      adam.zero_grad();
      loss_sum += value * static_cast<double>(which.size());
      seen += which.size();
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), mean_loss(model, cfg, val_windows)};
    result.curve.push_back(rec);
    if (on_epoch && !on_epoch(rec)) {
      result.stopped_early = true;
      break;
    }
    if (cfg.patience > 0) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

std::vector<float> predict(const Model& model, const ExperimentConfig& cfg,
                           std::span<const data::SeriesWindow> windows) {
  num::NoGradGuard guard;
  std::vector<float> out;
  if (windows.empty()) return out;
  out.reserve(windows.size() * windows[0].target.size());
  const auto all = iota_indices(windows.size());
  for (std::size_t begin = 0; begin < all.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(all.size(), begin + cfg.batch_size);
    std::span<const std::size_t> which(all.data() + begin, end - begin);
    auto batch = make_batch(windows, which, cfg.patch, cfg.revin_eps);
    auto pred = denormalize(model.forward(batch.patches), batch);
    out.insert(out.end(), pred.values().begin(), pred.values().end());
  }
  return out;
}

EvalResult evaluate(const Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                    data::Split split, bool keep_predictions) {
  const std::size_t horizon = model.spec().horizon;
  if (model.spec().history_len != cfg.history_len) {
    throw CompatibilityError("model history length " + std::to_string(model.spec().history_len) +
                             " differs from config " + std::to_string(cfg.history_len));
  }
  const auto windows = data::make_windows(ds, split, cfg.history_len, horizon);
  EvalResult out;
  out.windows = windows.size();
  auto pred = predict(model, cfg, windows);
  std::vector<float> target;
  target.reserve(pred.size());
  for (const auto& w : windows) {
    for (double v : w.target) target.push_back(static_cast<float>(v));
  }
  out.metrics = compute_metrics<float, float>(pred, target);
  if (keep_predictions) {
    out.predictions = std::move(pred);
    out.targets = std::move(target);
  }
  return out;
}

void save_checkpoint(const Model& model, const ExperimentConfig& cfg,
                     const std::filesystem::path& index) {
  std::vector<semlm::NamedArray> arrays;
  for (const auto& [name, t] : model.named_parameters()) {
    arrays.push_back({name, t.shape(), std::vector<float>(t.values().begin(), t.values().end())});
  }
  if (index.has_parent_path()) std::filesystem::create_directories(index.parent_path());
  semlm::WeightManifest::write(
      index, arrays,
      {{"kind", "semfuse-checkpoint"},
       {"variant", std::string(variants::variant_name(model.kind()))},
       {"horizon", std::to_string(model.spec().horizon)},
       {"config_fingerprint", cfg.fingerprint()}});
}

std::unique_ptr<Model> load_checkpoint(const ExperimentConfig& cfg, variants::VariantKind kind,
                                       std::size_t horizon, const std::filesystem::path& index) {
  semlm::WeightManifest m;
  try {
    m = semlm::WeightManifest::read(index);
  } catch (const LoadError& e) {
    throw CompatibilityError(std::string("unreadable checkpoint: ") + e.what());
  }
  const auto& meta = m.metadata();
  auto expect = [&](const std::string& key, const std::string& want) {
    auto it = meta.find(key);
    const std::string got = it == meta.end() ? "<missing>" : it->second;
    if (got != want) {
      throw CompatibilityError("checkpoint " + key + " is " + got + ", config expects " + want);
    }
  };
  expect("kind", "semfuse-checkpoint");
  expect("variant", std::string(variants::variant_name(kind)));
  expect("horizon", std::to_string(horizon));
  expect("config_fingerprint", cfg.fingerprint());

  auto model = variants::build_model<float>(kind, cfg.model_spec(horizon), 0);
  for (auto& [name, t] : model->named_parameters()) {
    const auto* entry = m.find(name);
    if (!entry) throw CompatibilityError("checkpoint lacks parameter " + name);
    if (entry->shape != t.shape()) {
      throw CompatibilityError("checkpoint parameter " + name + " has shape " +
                               num::shape_str(entry->shape) + ", model expects " +
                               num::shape_str(t.shape()));
    }
    auto values = m.load(name);
    auto dst = t.mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return model;
}

void write_curve_csv(const std::vector<EpochRecord>& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n" << std::setprecision(10);
  for (const auto& r : curve) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
}

}  // namespace semfuse::harness
