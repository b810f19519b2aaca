// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/harness/exports.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"

namespace semfuse::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using num::Tensor;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

const data::SeriesWindow& pick(const std::vector<data::SeriesWindow>& all, std::size_t window) {
  if (window >= all.size()) {
    throw ConfigError("window " + std::to_string(window) + " out of range; the test split has " +
                      std::to_string(all.size()) + " windows");
  }
  return all[window];
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// weights[h][r][c] from a [1, H, Lq, Lk] tensor, rows [r0, r0+n), cols [c0, c0+n).
ordered_json attention_block(const Tensor<float>& probs, std::size_t r0, std::size_t c0,
                             std::size_t n) {
  const std::size_t heads = probs.dim(1), lq = probs.dim(2), lk = probs.dim(3);
  auto v = probs.values();
  ordered_json out = ordered_json::array();
  for (std::size_t h = 0; h < heads; ++h) {
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < n; ++r) {
      ordered_json cols = ordered_json::array();
      for (std::size_t c = 0; c < n; ++c) {
        cols.push_back(static_cast<double>(v[(h * lq + r0 + r) * lk + c0 + c]));
      }
      rows.push_back(std::move(cols));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

std::vector<data::SeriesWindow> test_windows(const ExperimentConfig& cfg,
                                             const data::SeriesDataset& ds, std::size_t horizon) {
  return data::make_windows(ds, data::Split::kTest, cfg.history_len, horizon);
}

void export_attention(Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                      std::size_t window, const fs::path& out) {
  auto* bb = model.backbone();
  auto* sem = model.semantic();
  if (!bb || bb->lower_only() || !sem) {
    throw CapabilityError("variant " + std::string(variants::variant_name(model.kind())) +
                          " lacks the backbone or LM attention needed for export");
  }
  const auto all = test_windows(cfg, ds, model.spec().horizon);
  const auto& w = pick(all, window);
  const std::size_t idx[] = {window};
  auto batch = make_batch(all, idx, cfg.patch, cfg.revin_eps);

  const std::size_t last = bb->config().layers - 1;
  const std::size_t lm_last = model.lm_config().layers - 1;
  auto& bb_attn = bb->layer(last).attention();
  bb_attn.set_capture(true);
  sem->lm().set_capture(true);
  {
    num::NoGradGuard guard;
    model.forward(batch.patches);
  }
  const auto bb_probs = bb_attn.captured();
  const auto lm_probs = sem->lm().captured(lm_last);
  bb_attn.set_capture(false);
  sem->lm().set_capture(false);

  const std::size_t n = model.spec().num_patches();
  const bool temporal = model.kind() != variants::VariantKind::kLlmOnly;
  const auto lay = sem->layout(n, temporal);
  const std::size_t prefix = lay.z_begin();

  ordered_json doc;
  doc["format"] = "semfuse-attn-v1";
  doc["window"] = window;
  doc["channel"] = w.channel;
  doc["origin"] = w.origin;
  doc["variant"] = variants::variant_name(model.kind());
  doc["num_patches"] = n;
  ordered_json bmap;
  bmap["source"] = "backbone";
  bmap["layer"] = last + 1;
  bmap["heads"] = bb_probs.dim(1);
  bmap["causal"] = false;
  bmap["row_axis"] = "query patch";
  bmap["col_axis"] = "key patch";
  bmap["shape"] = {bb_probs.dim(1), n, n};
  bmap["weights"] = attention_block(bb_probs, 0, 0, n);
  ordered_json lmap;
  lmap["source"] = "llm";
  lmap["layer"] = lm_last + 1;
  lmap["heads"] = lm_probs.dim(1);
  lmap["causal"] = true;
  lmap["row_axis"] = "query patch";
  lmap["col_axis"] = "key patch";
  lmap["shape"] = {lm_probs.dim(1), n, n};
  // Captured rows cover the per-window body only; columns span prefix and body.
  lmap["weights"] = attention_block(lm_probs, lay.x_begin() - prefix, lay.x_begin(), n);
  doc["maps"] = {bmap, lmap};
  auto f = open_out(out);
  f << doc.dump() << '\n';
}

void export_embeddings(const Model& model, const ExperimentConfig& cfg,
                       const data::SeriesDataset& ds, const std::vector<std::size_t>& windows,
                       const fs::path& out) {
  if (!model.fusion()) {
    throw CapabilityError("variant " + std::string(variants::variant_name(model.kind())) +
                          " has no aligned LM features to export");
  }
  const auto all = test_windows(cfg, ds, model.spec().horizon);
  for (auto w : windows) pick(all, w);
  const std::size_t n = model.spec().num_patches();
  const std::size_t d = model.spec().backbone.d_model;
  auto f = open_out(out);
  f << "label,window,patch";
  for (std::size_t j = 0; j < d; ++j) f << ",f" << j;
  f << '\n';
  num::NoGradGuard guard;
  for (auto w : windows) {
    const std::size_t idx[] = {w};
    auto batch = make_batch(all, idx, cfg.patch, cfg.revin_eps);
    auto tr = model.trace(batch.patches);
    const std::pair<const char*, const Tensor<float>*> sources[] = {{"transformer", &tr.z_lower},
                                                                    {"llm", &tr.aligned}};
    for (const auto& [label, t] : sources) {
      auto v = t->values();
      for (std::size_t p = 0; p < n; ++p) {
        f << label << ',' << w << ',' << p;
        for (std::size_t j = 0; j < d; ++j) f << ',' << fmt(v[p * d + j]);
        f << '\n';
      }
    }
  }
}

void forecast_dump(const Model& model, const ExperimentConfig& cfg, const data::SeriesDataset& ds,
                   std::size_t window, const fs::path& out) {
  const auto all = test_windows(cfg, ds, model.spec().horizon);
  const auto& w = pick(all, window);
  const auto pred = predict(model, cfg, std::span<const data::SeriesWindow>(&w, 1));
  const std::size_t c = w.channel;
  auto f = open_out(out);
  f << "t,series,value\n";
  for (std::size_t i = 0; i < w.history.size(); ++i) {
    f << w.origin + i << ",history," << fmt(ds.to_original_units(c, w.history[i])) << '\n';
  }
  const std::size_t start = w.origin + w.history.size();
  for (std::size_t i = 0; i < w.target.size(); ++i) {
    f << start + i << ",target," << fmt(ds.to_original_units(c, w.target[i])) << '\n';
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    f << start + i << ",prediction," << fmt(ds.to_original_units(c, pred[i])) << '\n';
  }
}

}  // namespace semfuse::harness
