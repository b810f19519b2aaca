// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "semfuse/errors.hpp"
#include "semfuse/patching/patching.hpp"

namespace {

namespace patching = semfuse::patching;
using patching::PatchConfig;

// Brute force: count length-T windows at stride S over the end-padded series.
std::size_t enumerate_patches(std::size_t tx, std::size_t t, std::size_t s) {
  const std::size_t padded = tx + s;
  std::size_t count = 0;
  for (std::size_t start = 0; start + t <= padded; start += s) ++count;
  return count;
}

std::vector<double> ramp(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

TEST(PadSeries, RepeatsLastValue) {
  std::vector<double> h{1, 2, 3};
  EXPECT_EQ(patching::pad_series(h, 2), (std::vector<double>{1, 2, 3, 3, 3}));
  EXPECT_EQ(patching::pad_series(h, 1), (std::vector<double>{1, 2, 3, 3}));
}

TEST(PadSeries, PrefixPreserved) {
  auto h = ramp(37);
  auto p = patching::pad_series(h, 5);
  ASSERT_EQ(p.size(), 42u);
  EXPECT_TRUE(std::equal(h.begin(), h.end(), p.begin()));
}

TEST(PatchCount, ReportedConfigurations) {
  EXPECT_EQ(patching::patch_count(336, 16, 8), 42u);
  EXPECT_EQ(patching::patch_count(104, 24, 2), 42u);
}

TEST(PatchCount, PatchAsLongAsHistoryGivesTwo) {
  for (std::size_t s = 1; s <= 9; ++s) EXPECT_EQ(patching::patch_count(9, 9, s), 2u);
}

TEST(PatchCount, MatchesEnumerationOnEveryValidConfig) {
  std::size_t checked = 0;
  for (std::size_t tx = 1; tx <= 512; ++tx) {
    for (std::size_t t = 1; t <= 64 && t <= tx; ++t) {
      for (std::size_t s = 1; s <= t; ++s) {
        ASSERT_EQ(patching::patch_count(tx, t, s), enumerate_patches(tx, t, s))
            << tx << "," << t << "," << s;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 900000u);
}

TEST(PatchCount, RejectsPatchLongerThanHistory) {
  EXPECT_THROW(patching::patch_count(10, 11, 2), semfuse::ConfigError);
  EXPECT_THROW(patching::patch_count(10, 4, 5), semfuse::ConfigError);
  EXPECT_THROW(patching::patch_count(10, 4, 0), semfuse::ConfigError);
}

TEST(Patchify, SmallConfigStarts) {
  auto h = ramp(10);
  auto p = patchify(h, PatchConfig{4, 3});
  ASSERT_EQ(p.rows, 4u);
  const std::size_t starts[] = {0, 3, 6, 9};
  auto padded = patching::pad_series(h, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p.row(i)[j], padded[starts[i] + j]);
  }
  // Last patch is [10, 10, 10, 10]: one real value plus three padded copies.
  EXPECT_EQ(p.row(3)[3], 10.0);
}

TEST(Patchify, IliConfigShape) {
  auto p = patchify(ramp(104), PatchConfig{24, 2});
  EXPECT_EQ(p.rows, 42u);
  EXPECT_EQ(p.cols, 24u);
  EXPECT_EQ(p.row(41)[0], 83.0);
}

TEST(Patchify, RowsReconstructPaddedSeries) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t tx = 8 + gen() % 120;
    const std::size_t t = 1 + gen() % std::min<std::size_t>(tx, 32);
    const std::size_t s = 1 + gen() % t;
    std::vector<double> h(tx);
    for (auto& v : h) v = u(gen);
    auto p = patchify(h, PatchConfig{t, s});
    auto padded = patching::pad_series(h, s);
    std::vector<int> covered(padded.size(), 0);
    for (std::size_t i = 0; i < p.rows; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        EXPECT_EQ(p.row(i)[j], padded[i * s + j]);
        covered[i * s + j] = 1;
      }
    }
    for (std::size_t i = 0; i < tx; ++i) EXPECT_TRUE(covered[i]) << "timestep " << i;
    // Same input, same output.
    EXPECT_EQ(patchify(h, PatchConfig{t, s}).values, p.values);
  }
}

TEST(PatchBatch, StacksIntoRank3Tensor) {
  std::vector<std::vector<double>> hs{ramp(10), ramp(10)};
  auto t = patching::patch_batch<float>(hs, PatchConfig{4, 3});
  EXPECT_EQ(t.shape(), (semfuse::num::Shape{2, 4, 4}));
  EXPECT_EQ(t.at({1, 1, 0}), 4.0f);
}

}  // namespace
