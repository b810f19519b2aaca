// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/patching/patching.hpp"

#include <algorithm>
#include <string>

#include "semfuse/errors.hpp"

namespace semfuse::patching {

void PatchConfig::validate(std::size_t history_len) const {
  if (patch_len == 0 || stride == 0) throw ConfigError("patch length and stride must be positive");
  if (stride > patch_len) {
    throw ConfigError("patch stride " + std::to_string(stride) + " exceeds patch length " +
                      std::to_string(patch_len) + "; timesteps would be skipped");
  }
  if (patch_len > history_len) {
    throw ConfigError("patch length " + std::to_string(patch_len) + " exceeds history length " +
                      std::to_string(history_len));
  }
}

std::vector<double> pad_series(std::span<const double> history, std::size_t stride) {
  if (history.empty()) throw ContractError("pad_series on an empty history");
  std::vector<double> out(history.begin(), history.end());
  out.insert(out.end(), stride, history.back());
  return out;
}

std::size_t patch_count(std::size_t history_len, std::size_t patch_len, std::size_t stride) {
  PatchConfig{patch_len, stride}.validate(history_len);
  return (history_len - patch_len) / stride + 2;
}

PatchMatrix patchify(std::span<const double> history, const PatchConfig& cfg) {
  const std::size_t n = patch_count(history.size(), cfg.patch_len, cfg.stride);
  const auto padded = pad_series(history, cfg.stride);
  PatchMatrix out;
  out.rows = n;
  out.cols = cfg.patch_len;
  out.source_len = history.size();
  out.values.resize(n * cfg.patch_len);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(padded.begin() + i * cfg.stride, cfg.patch_len,
                out.values.begin() + i * cfg.patch_len);
  }
  return out;
}

template <typename T>
num::Tensor<T> patch_batch(const std::vector<std::vector<double>>& histories,
                           const PatchConfig& cfg) {
  if (histories.empty()) throw ContractError("patch_batch of zero histories");
  const std::size_t len = histories.front().size();
  const std::size_t n = patch_count(len, cfg.patch_len, cfg.stride);
  std::vector<T> values;
  values.reserve(histories.size() * n * cfg.patch_len);
  for (const auto& h : histories) {
    if (h.size() != len) throw DimensionError("histories in a batch must share one length");
    const auto p = patchify(h, cfg);
    for (double v : p.values) values.push_back(static_cast<T>(v));
  }
  return num::Tensor<T>::from({histories.size(), n, cfg.patch_len}, std::move(values));
}

template num::Tensor<float> patch_batch(const std::vector<std::vector<double>>&,
                                        const PatchConfig&);
template num::Tensor<double> patch_batch(const std::vector<std::vector<double>>&,
                                         const PatchConfig&);

}  // namespace semfuse::patching
