// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "semfuse/errors.hpp"

namespace semfuse::harness {

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

/// Running sums in double; the result is the mean over every added element.
class MetricAccumulator {
 public:
  template <typename P, typename Q>
  void add(std::span<const P> pred, std::span<const Q> target) {
    if (pred.size() != target.size()) {
      throw ContractError("metric inputs differ in length: " + std::to_string(pred.size()) +
                          " vs " + std::to_string(target.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
      sq_ += d * d;
      abs_ += std::abs(d);
    }
    count_ += pred.size();
  }

  Metrics result() const {
    if (count_ == 0) return {};
    return {sq_ / static_cast<double>(count_), abs_ / static_cast<double>(count_), count_};
  }

 private:
  double sq_ = 0.0;
  double abs_ = 0.0;
  std::size_t count_ = 0;
};

template <typename P, typename Q>
Metrics compute_metrics(std::span<const P> pred, std::span<const Q> target) {
  MetricAccumulator acc;
  acc.add(pred, target);
  return acc.result();
}

}  // namespace semfuse::harness
