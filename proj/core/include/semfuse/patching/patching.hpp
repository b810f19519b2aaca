// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "semfuse/numerics/tensor.hpp"

namespace semfuse::patching {

struct PatchConfig {
  std::size_t patch_len = 16;
  std::size_t stride = 8;

  /// Throws ConfigError unless 0 < stride <= patch_len <= history_len.
  void validate(std::size_t history_len) const;
};

/// N x T matrix of overlapping patches taken from the end-padded history.
struct PatchMatrix {
  std::size_t rows = 0;  // N
  std::size_t cols = 0;  // T
  std::size_t source_len = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Appends `stride` copies of the final value.
std::vector<double> pad_series(std::span<const double> history, std::size_t stride);

/// floor((T_x - T) / S) + 2.
std::size_t patch_count(std::size_t history_len, std::size_t patch_len, std::size_t stride);

/// Row i is padded[i*S, i*S + T). The final patch may be entirely padding.
PatchMatrix patchify(std::span<const double> history, const PatchConfig& cfg);

/// Stacks already-normalized histories into a [B, N, T] model input.
template <typename T>
num::Tensor<T> patch_batch(const std::vector<std::vector<double>>& histories,
                           const PatchConfig& cfg);

}  // namespace semfuse::patching
