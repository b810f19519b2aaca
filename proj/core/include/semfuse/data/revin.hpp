// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

namespace semfuse::data {

/// Per-instance statistics of one history segment.
struct RevinStats {
  double mean = 0.0;
  /// Population standard deviation of the history.
  double std = 1.0;
  double eps = 1e-5;

  /// Divisor used by normalize/denormalize: max(std, eps).
  double scale() const { return std > eps ? std : eps; }
};

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> history,
                                                           double eps = 1e-5);

std::vector<double> revin_denormalize(std::span<const double> pred, const RevinStats& stats);

}  // namespace semfuse::data
