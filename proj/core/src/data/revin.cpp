// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/data/revin.hpp"

#include <cmath>

#include "semfuse/errors.hpp"

namespace semfuse::data {

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> history,
                                                           double eps) {
  if (history.empty()) throw ContractError("revin_normalize on an empty history");
  const double n = static_cast<double>(history.size());
  double mean = 0.0;
  for (double v : history) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : history) var += (v - mean) * (v - mean);
  var /= n;
  RevinStats stats{mean, std::sqrt(var), eps};
  const double s = stats.scale();
  std::vector<double> out(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) out[i] = (history[i] - mean) / s;
  return {std::move(out), stats};
}

std::vector<double> revin_denormalize(std::span<const double> pred, const RevinStats& stats) {
  const double s = stats.scale();
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] * s + stats.mean;
  return out;
}

}  // namespace semfuse::data
