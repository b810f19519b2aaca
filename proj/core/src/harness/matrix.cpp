// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/harness/matrix.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "semfuse/errors.hpp"
#include "semfuse/harness/training.hpp"
#include "semfuse/semlm/manifest.hpp"

namespace semfuse::harness {

namespace fs = std::filesystem;

namespace {

constexpr const char* kHeader =
    "dataset,variant,horizon,seed,status,mse,mae,seeds_ok,epochs,predictions,config,error";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string dataset_label(const ExperimentConfig& cfg) {
  if (!cfg.dataset_name.empty()) return cfg.dataset_name;
  return fs::path(cfg.dataset_path).stem().string();
}

Metrics metrics_from_predictions(const fs::path& index) {
  auto m = semlm::WeightManifest::read(index);
  const auto pred = m.load("pred");
  const auto target = m.load("target");
  return compute_metrics<float, float>(pred, target);
}

}  // namespace

std::string run_name(const std::string& dataset, const std::string& variant, std::size_t horizon,
                     std::uint64_t seed) {
  return dataset + "_" + variant + "_h" + std::to_string(horizon) + "_s" + std::to_string(seed);
}

std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells) {
  std::vector<AggregateRow> out;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> slot;
  for (const auto& c : cells) {
    auto key = std::make_tuple(c.dataset, c.variant, c.horizon);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back({c.dataset, c.variant, c.horizon, 0, 0, 0.0, 0.0});
    }
    auto& row = out[it->second];
    ++row.seeds_total;
    if (!c.ok) continue;
    ++row.seeds_ok;
    row.mse += c.mse;
    row.mae += c.mae;
  }
  for (auto& row : out) {
    if (row.seeds_ok == 0) continue;
    row.mse /= static_cast<double>(row.seeds_ok);
    row.mae /= static_cast<double>(row.seeds_ok);
  }
  return out;
}

MatrixReport run_matrix(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  MatrixReport report;
  report.fingerprint = cfg.fingerprint();
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir / "checkpoints");
  fs::create_directories(out_dir / "predictions");
  const std::string dataset = dataset_label(cfg);

  for (auto horizon : cfg.horizons) {
    std::optional<data::SeriesDataset> ds;
    std::string data_error;
    try {
      ds = prepare_dataset(cfg, horizon);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (auto kind : cfg.variants) {
      const std::string variant(variants::variant_name(kind));
      for (auto seed : cfg.seeds) {
        CellResult cell;
        cell.dataset = dataset;
        cell.variant = variant;
        cell.horizon = horizon;
        cell.seed = seed;
        const std::string run = run_name(dataset, variant, horizon, seed);
        const auto start = std::chrono::steady_clock::now();
        try {
          if (!ds) throw LoadError(data_error);
          auto trained = train(cfg, *ds, kind, horizon, seed);
          cell.epochs_run = trained.curve.size();
          write_curve_csv(trained.curve, out_dir / ("curve_" + run + ".csv"));
          save_checkpoint(*trained.model, cfg, out_dir / "checkpoints" / (run + ".json"));
          auto eval = evaluate(*trained.model, cfg, *ds, data::Split::kTest, true);
          cell.predictions = "predictions/" + run + ".json";
          semlm::WeightManifest::write(
              out_dir / cell.predictions,
              {{"pred", {eval.windows, horizon}, std::move(eval.predictions)},
               {"target", {eval.windows, horizon}, std::move(eval.targets)}},
              {{"kind", "semfuse-predictions"}, {"run", run}});
          cell.mse = eval.metrics.mse;
          cell.mae = eval.metrics.mae;
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cell.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (log) {
          *log << run << ": "
               << (cell.ok ? "mse " + fmt(cell.mse) + " mae " + fmt(cell.mae)
                           : "error: " + cell.error)
               << " (" << fmt(cell.seconds) << " s)\n";
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  report.aggregates = aggregate(report.cells);
  write_results_csv(report, out_dir / "results.csv");
  write_timing_csv(report, out_dir / "timing.csv");
  return report;
}

void write_results_csv(const MatrixReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kHeader << '\n';
  for (const auto& c : report.cells) {
    out << c.dataset << ',' << c.variant << ',' << c.horizon << ',' << c.seed << ','
        << (c.ok ? "ok" : "error") << ',' << (c.ok ? fmt(c.mse) : "") << ','
        << (c.ok ? fmt(c.mae) : "") << ',' << (c.ok ? 1 : 0) << ',' << c.epochs_run << ','
        << c.predictions << ',' << report.fingerprint << ',' << sanitize(c.error) << '\n';
  }
  for (const auto& a : report.aggregates) {
    const bool ok = a.seeds_ok > 0;
    out << a.dataset << ',' << a.variant << ',' << a.horizon << ",mean," << (ok ? "ok" : "error")
        << ',' << (ok ? fmt(a.mse) : "") << ',' << (ok ? fmt(a.mae) : "") << ',' << a.seeds_ok
        << "/" << a.seeds_total << ",,," << report.fingerprint << ",\n";
  }
}

void write_timing_csv(const MatrixReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "run,seconds,epochs\n";
  for (const auto& c : report.cells) {
    out << run_name(c.dataset, c.variant, c.horizon, c.seed) << ',' << fmt(c.seconds) << ','
        << c.epochs_run << '\n';
  }
}

MatrixReport regenerate_report(const fs::path& dir) {
  std::ifstream in(dir / "results.csv");
  if (!in) throw FormatError("cannot open " + (dir / "results.csv").string());
  std::string line;
  std::getline(in, line);
  if (line != kHeader) throw FormatError("results.csv has an unexpected header");
  MatrixReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 12) throw FormatError("results.csv row with " + std::to_string(f.size()) +
                                          " fields: " + line);
    if (f[3] == "mean") continue;
    CellResult c;
    c.dataset = f[0];
    c.variant = f[1];
    c.horizon = std::stoul(f[2]);
    c.seed = std::stoull(f[3]);
    c.ok = f[4] == "ok";
    c.epochs_run = std::stoul(f[8]);
    c.predictions = f[9];
    report.fingerprint = f[10];
    c.error = f[11];
    if (c.ok) {
      auto m = metrics_from_predictions(dir / c.predictions);
      c.mse = m.mse;
      c.mae = m.mae;
    }
    report.cells.push_back(std::move(c));
  }
  report.aggregates = aggregate(report.cells);
  write_results_csv(report, dir / "results.csv");
  return report;
}

}  // namespace semfuse::harness
