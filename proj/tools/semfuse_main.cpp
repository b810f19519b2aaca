// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/harness/config.hpp"
#include "semfuse/harness/exports.hpp"
#include "semfuse/harness/matrix.hpp"
#include "semfuse/harness/training.hpp"

namespace fs = std::filesystem;
namespace hs = semfuse::harness;
namespace va = semfuse::variants;

namespace {

struct Common {
  std::string config;
  std::string dataset;
  std::string variant;
  std::optional<std::size_t> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool deterministic = false;
  std::string out;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--dataset", c.dataset, "dataset CSV path, or a name resolved as data/<name>.csv");
  cmd->add_option("--variant", c.variant,
                  "fused, trans_only, llm_only, trans_llm_add or llm_decoder");
  cmd->add_option("--horizon", c.horizon, "prediction length T_y");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--epochs", c.epochs, "override the configured epoch count");
  cmd->add_flag("--deterministic", c.deterministic, "bit-reproducible single-threaded run");
  cmd->add_option("--out", c.out, "output directory");
}

hs::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? hs::ExperimentConfig::general() : hs::load_config(c.config);
  if (!c.dataset.empty()) {
    if (fs::exists(c.dataset)) {
      cfg.dataset_path = c.dataset;
      cfg.dataset_name = fs::path(c.dataset).stem().string();
    } else {
      cfg.dataset_name = c.dataset;
      cfg.dataset_path = "data/" + c.dataset + ".csv";
    }
  }
  if (!c.variant.empty()) cfg.variants = {va::parse_variant(c.variant)};
  if (c.horizon) cfg.horizons = {*c.horizon};
  if (c.seed) cfg.seeds = {*c.seed};
  if (c.epochs) cfg.epochs = *c.epochs;
  if (c.deterministic) cfg.deterministic = true;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

struct Cell {
  va::VariantKind kind;
  std::size_t horizon;
  std::uint64_t seed;
  std::string run;
};

Cell first_cell(const hs::ExperimentConfig& cfg) {
  Cell cell{cfg.variants.front(), cfg.horizons.front(), cfg.seeds.front(), {}};
  const std::string name =
      cfg.dataset_name.empty() ? fs::path(cfg.dataset_path).stem().string() : cfg.dataset_name;
  cell.run = hs::run_name(name, std::string(va::variant_name(cell.kind)), cell.horizon, cell.seed);
  return cell;
}

fs::path checkpoint_path(const hs::ExperimentConfig& cfg, const Common& c, const Cell& cell) {
  if (!c.checkpoint.empty()) return c.checkpoint;
  return fs::path(cfg.output_dir) / "checkpoints" / (cell.run + ".json");
}

int cmd_train(const Common& c) {
  auto cfg = resolve(c);
  auto cell = first_cell(cfg);
  auto ds = hs::prepare_dataset(cfg, cell.horizon);
  auto result = hs::train(cfg, ds, cell.kind, cell.horizon, cell.seed,
                          [](const hs::EpochRecord& r) {
                            std::cout << "epoch " << r.epoch << " train " << r.train_loss
                                      << " val " << r.val_loss << '\n';
                            return true;
                          });
  const fs::path out = cfg.output_dir;
  hs::write_curve_csv(result.curve, out / ("curve_" + cell.run + ".csv"));
  const auto ckpt = checkpoint_path(cfg, c, cell);
  hs::save_checkpoint(*result.model, cfg, ckpt);
  auto eval = hs::evaluate(*result.model, cfg, ds, semfuse::data::Split::kTest);
  std::cout << "checkpoint " << ckpt.string() << "\ntest mse " << eval.metrics.mse << " mae "
            << eval.metrics.mae << '\n';
  return 0;
}

int cmd_evaluate(const Common& c) {
  auto cfg = resolve(c);
  auto cell = first_cell(cfg);
  auto ds = hs::prepare_dataset(cfg, cell.horizon);
  auto model = hs::load_checkpoint(cfg, cell.kind, cell.horizon, checkpoint_path(cfg, c, cell));
  auto eval = hs::evaluate(*model, cfg, ds, semfuse::data::Split::kTest);
  std::cout << "windows " << eval.windows << "\nmse " << eval.metrics.mse << "\nmae "
            << eval.metrics.mae << '\n';
  return 0;
}

int cmd_matrix(const Common& c, bool regenerate) {
  if (regenerate) {
    const fs::path dir = c.out.empty() ? resolve(c).output_dir : c.out;
    auto report = hs::regenerate_report(dir);
    std::cout << "rewrote " << (dir / "results.csv").string() << " from "
              << report.cells.size() << " stored runs\n";
    return 0;
  }
  auto cfg = resolve(c);
  auto report = hs::run_matrix(cfg, &std::cout);
  std::size_t failed = 0;
  for (const auto& cell : report.cells) failed += cell.ok ? 0 : 1;
  std::cout << "results " << (fs::path(cfg.output_dir) / "results.csv").string() << " ("
            << report.cells.size() - failed << " ok, " << failed << " failed)\n";
  return failed == 0 ? 0 : 2;
}

int cmd_export(const Common& c, const std::string& what, const std::vector<std::size_t>& windows) {
  auto cfg = resolve(c);
  auto cell = first_cell(cfg);
  auto ds = hs::prepare_dataset(cfg, cell.horizon);
  auto model = hs::load_checkpoint(cfg, cell.kind, cell.horizon, checkpoint_path(cfg, c, cell));
  const fs::path out = cfg.output_dir;
  if (what == "attn") {
    for (auto w : windows) {
      const auto path = out / ("attn_" + std::to_string(w) + ".json");
      hs::export_attention(*model, cfg, ds, w, path);
      std::cout << path.string() << '\n';
    }
  } else if (what == "embeddings") {
    const auto path = out / "embeddings.csv";
    hs::export_embeddings(*model, cfg, ds, windows, path);
    std::cout << path.string() << '\n';
  } else {
    for (auto w : windows) {
      const auto path = out / ("forecast_" + std::to_string(w) + ".csv");
      hs::forecast_dump(*model, cfg, ds, w, path);
      std::cout << path.string() << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large activation buffers on the heap instead of fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"semfuse: patch Transformer forecasting with LM feature fusion"};
  app.require_subcommand(1);
  Common common;
  bool regenerate = false;
  std::vector<std::size_t> windows{0};

  auto* train = app.add_subcommand("train", "train one (variant, horizon, seed) cell");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  auto* matrix = app.add_subcommand("run-matrix", "train and evaluate every configured cell");
  auto* attn = app.add_subcommand("export-attn", "write attention maps for test windows");
  auto* emb = app.add_subcommand("export-embeddings", "write Z and aligned Z_LLM rows");
  auto* forecast = app.add_subcommand("forecast", "write history, target and prediction");
  for (auto* cmd : {train, evaluate, matrix, attn, emb, forecast}) add_common(cmd, common);
  for (auto* cmd : {evaluate, attn, emb, forecast}) {
    cmd->add_option("--checkpoint", common.checkpoint,
                    "checkpoint index (default <out>/checkpoints/<run>.json)");
  }
  for (auto* cmd : {attn, emb, forecast}) {
    cmd->add_option("--window", windows, "test-split window index (repeatable)");
  }
  matrix->add_flag("--regenerate", regenerate,
                   "rebuild results.csv from stored predictions instead of training");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(common);
    if (evaluate->parsed()) return cmd_evaluate(common);
    if (matrix->parsed()) return cmd_matrix(common, regenerate);
    if (attn->parsed()) return cmd_export(common, "attn", windows);
    if (emb->parsed()) return cmd_export(common, "embeddings", windows);
    if (forecast->parsed()) return cmd_export(common, "forecast", windows);
  } catch (const semfuse::Error& e) {
    std::cerr << "semfuse: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
