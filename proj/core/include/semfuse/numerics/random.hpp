// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace semfuse::num {

/// Seeded generator shared by initializers, dropout and shuffling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Normal redrawn until it lies within +-2 stddev.
  double truncated_normal(double stddev);
  std::uint64_t next_u64() { return engine_(); }

  template <typename T>
  void fill_truncated_normal(std::span<T> out, double stddev) {
    for (auto& v : out) v = static_cast<T>(truncated_normal(stddev));
  }
  template <typename T>
  void fill_uniform(std::span<T> out, double lo, double hi) {
    for (auto& v : out) v = static_cast<T>(uniform(lo, hi));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace semfuse::num
