// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/numerics/random.hpp"

#include <cmath>

namespace semfuse::num {

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

double Rng::normal(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

double Rng::truncated_normal(double stddev) {
  if (stddev == 0.0) return 0.0;
  for (;;) {
    const double v = normal(0.0, stddev);
    if (std::abs(v) <= 2.0 * stddev) return v;
  }
}

}  // namespace semfuse::num
