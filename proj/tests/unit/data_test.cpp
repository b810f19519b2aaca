// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "semfuse/data/dataset.hpp"
#include "semfuse/data/revin.hpp"
#include "semfuse/errors.hpp"
#include "support/fixtures.hpp"

namespace {

namespace data = semfuse::data;
using data::Split;
using data::SplitRatios;
using semfuse::testing::scratch_dir;

data::SeriesDataset single_channel(const std::vector<double>& v) {
  return data::SeriesDataset(v, v.size(), 1, {"x"});
}

TEST(LoadCsv, IliShapedFileWithDateColumn) {
  auto path = semfuse::testing::write_table_csv(scratch_dir("load") / "ili.csv", 966, 7, true);
  auto ds = data::load_csv(path);
  EXPECT_EQ(ds.steps(), 966u);
  EXPECT_EQ(ds.channels(), 7u);
  EXPECT_EQ(ds.channel_names().front(), "f0");
  EXPECT_DOUBLE_EQ(ds.value(2, 3), 2 * 0.5 + 3);
}

TEST(LoadCsv, EttShapedFile) {
  auto path = semfuse::testing::write_ett_like_csv(scratch_dir("load") / "etth1.csv", 17420);
  auto ds = data::load_csv(path);
  EXPECT_EQ(ds.steps(), 17420u);
  EXPECT_EQ(ds.channels(), 7u);
  EXPECT_EQ(ds.channel_names().back(), "OT");
}

TEST(LoadCsv, NoDateColumnKeepsEveryColumn) {
  auto path = semfuse::testing::write_table_csv(scratch_dir("load") / "plain.csv", 10, 3, false);
  EXPECT_EQ(data::load_csv(path).channels(), 3u);
  EXPECT_EQ(data::load_csv(path, data::DateColumn::kPresent).channels(), 2u);
}

TEST(LoadCsv, EmptyFileIsAFormatError) {
  auto path = scratch_dir("load") / "empty.csv";
  std::ofstream(path).close();
  EXPECT_THROW(data::load_csv(path), semfuse::FormatError);
}

TEST(LoadCsv, RaggedRowIsAFormatError) {
  auto path = scratch_dir("load") / "ragged.csv";
  std::ofstream(path) << "a,b\n1,2\n3\n";
  EXPECT_THROW(data::load_csv(path), semfuse::FormatError);
}

TEST(LoadCsv, BadCellNamesRowAndColumn) {
  auto path = scratch_dir("load") / "bad.csv";
  std::ofstream(path) << "date,a,b\nx,1,2\ny,3,oops\n";
  try {
    data::load_csv(path);
    FAIL();
  } catch (const semfuse::ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 3"), std::string::npos) << msg;
  }
}

TEST(Split, HundredStepsSevenOneTwo) {
  auto r = data::chronological_split(100, SplitRatios::standard());
  EXPECT_EQ(r.train, (data::IndexRange{0, 70}));
  EXPECT_EQ(r.val, (data::IndexRange{70, 80}));
  EXPECT_EQ(r.test, (data::IndexRange{80, 100}));
}

TEST(Split, EttOneHourSixTwoTwo) {
  auto r = data::chronological_split(17420, SplitRatios::ett());
  EXPECT_EQ(r.train, (data::IndexRange{0, 10452}));
  EXPECT_EQ(r.val, (data::IndexRange{10452, 13936}));
  EXPECT_EQ(r.test, (data::IndexRange{13936, 17420}));
}

TEST(Split, RemainderGoesToTest) {
  auto r = data::chronological_split(101, SplitRatios::standard());
  EXPECT_EQ(r.train.size() + r.val.size() + r.test.size(), 101u);
  EXPECT_EQ(r.test.size(), 21u);
}

TEST(Split, DegenerateRatiosRejected) {
  EXPECT_THROW(data::chronological_split(100, {1.0, 0.0, 0.0}), semfuse::ConfigError);
  EXPECT_THROW(data::chronological_split(100, {0.5, 0.2, 0.2}), semfuse::ConfigError);
}

TEST(Split, ShortSplitIsInsufficientData) {
  EXPECT_THROW(data::chronological_split(100, SplitRatios::standard(), 11),
               semfuse::InsufficientDataError);
}

TEST(Split, PresetsLeakFree) {
  for (auto ratios : {SplitRatios::ett(), SplitRatios::standard(), SplitRatios{0.5, 0.25, 0.25}}) {
    for (std::size_t steps : {50u, 97u, 1000u, 17420u, 69680u}) {
      auto r = data::chronological_split(steps, ratios);
      EXPECT_EQ(r.train.begin, 0u);
      EXPECT_EQ(r.train.end, r.val.begin);
      EXPECT_EQ(r.val.end, r.test.begin);
      EXPECT_EQ(r.test.end, steps);
      EXPECT_LT(r.train.end - 1, r.val.begin);
      EXPECT_LT(r.val.end - 1, r.test.begin);
    }
  }
  EXPECT_EQ(SplitRatios::for_dataset("ETTm2").train, 0.6);
  EXPECT_EQ(SplitRatios::for_dataset("weather").train, 0.7);
}

TEST(ZScore, TrainStatisticsOnly) {
  auto ds = single_channel({1, 2, 3, 10, 20}).with_splits({0.6, 0.2, 0.2});
  auto z = data::zscore_fit_apply(ds);
  const double s = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(z.value(0, 0), -1.0 / s, 1e-12);
  EXPECT_NEAR(z.value(0, 0), -1.2247, 1e-4);
  EXPECT_NEAR(z.value(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(z.value(2, 0), 1.2247, 1e-4);
  // Val is transformed with train stats, so it is not centred.
  EXPECT_NEAR(z.value(3, 0), 8.0 / s, 1e-12);
  EXPECT_NE(z.value(3, 0), 0.0);
  EXPECT_DOUBLE_EQ(z.train_stats()[0].mean, 2.0);
  EXPECT_NEAR(z.to_original_units(0, z.value(4, 0)), 20.0, 1e-12);
}

TEST(ZScore, IdempotentOnStandardizedData) {
  auto ds = single_channel({1, 2, 3, 10, 20}).with_splits({0.6, 0.2, 0.2});
  auto once = data::zscore_fit_apply(ds);
  auto twice = data::zscore_fit_apply(once);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(twice.value(t, 0), once.value(t, 0), 1e-6);
}

TEST(ZScore, ConstantChannelNamed) {
  auto ds = data::SeriesDataset({1, 5, 2, 5, 3, 5, 4, 6, 5, 7}, 5, 2, {"ok", "flat"})
                .with_splits({0.6, 0.2, 0.2});
  try {
    data::zscore_fit_apply(ds);
    FAIL();
  } catch (const semfuse::ConstantChannelError& e) {
    EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
  }
}

TEST(ZScore, TrainSplitIsStandardized) {
  auto path = semfuse::testing::write_ett_like_csv(scratch_dir("z") / "ett.csv", 2000, 3);
  auto ds = data::zscore_fit_apply(data::load_csv(path).with_splits(SplitRatios::ett()));
  auto tr = ds.range(Split::kTrain);
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    double m = 0, v = 0;
    for (std::size_t t = tr.begin; t < tr.end; ++t) m += ds.value(t, c);
    m /= tr.size();
    for (std::size_t t = tr.begin; t < tr.end; ++t) v += (ds.value(t, c) - m) * (ds.value(t, c) - m);
    v /= tr.size();
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_LT(std::abs(std::sqrt(v) - 1.0), 1e-6);
  }
}

TEST(Windows, ExactlyOneOriginPerChannel) {
  std::vector<double> v(1000 * 7, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 13);
  // train 600, val 200, test 200.
  auto ds = data::SeriesDataset(v, 1000, 7, {"a", "b", "c", "d", "e", "f", "g"})
                .with_splits(SplitRatios::ett());
  auto w = data::make_windows(ds, Split::kVal, 104, 96);
  EXPECT_EQ(w.size(), 7u);
  EXPECT_THROW(data::make_windows(ds, Split::kVal, 104, 97), semfuse::InsufficientDataError);
}

TEST(Windows, CountFormulaAndNoLeakageMatchEnumeration) {
  for (std::size_t steps = 20; steps <= 80; steps += 7) {
    std::vector<double> v(steps * 2);
    auto ds = data::SeriesDataset(v, steps, 2, {"a", "b"}).with_splits(SplitRatios::standard());
    for (auto split : {Split::kTrain, Split::kVal, Split::kTest}) {
      const auto r = ds.range(split);
      for (std::size_t tx = 1; tx <= 8; ++tx) {
        for (std::size_t ty = 1; ty <= 6; ++ty) {
          for (std::size_t stride = 1; stride <= 3; ++stride) {
            // Enumeration oracle: every origin whose window stays in the split.
            std::size_t expected = 0;
            for (std::size_t o = r.begin; o + tx + ty <= r.end; o += stride) ++expected;
            if (expected == 0) {
              EXPECT_THROW(data::make_windows(ds, split, tx, ty, stride),
                           semfuse::InsufficientDataError);
              continue;
            }
            auto ws = data::make_windows(ds, split, tx, ty, stride);
            ASSERT_EQ(ws.size(), 2 * expected);
            EXPECT_EQ(data::windows_per_channel(r.size(), tx, ty, stride), expected);
            for (const auto& w : ws) {
              EXPECT_TRUE(r.contains(w.origin));
              EXPECT_TRUE(r.contains(w.origin + tx + ty - 1));
              // Target starts right where history ends.
              EXPECT_EQ(w.history.data() + w.history.size(), w.target.data());
            }
          }
        }
      }
    }
  }
}

TEST(Revin, ConstantHistoryGivesZeros) {
  std::vector<double> h{5, 5, 5};
  auto [out, stats] = data::revin_normalize(h);
  for (double v : out) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_EQ(stats.std, 0.0);
}

TEST(Revin, TwoPointHistory) {
  std::vector<double> h{1, 3};
  auto [out, stats] = data::revin_normalize(h);
  EXPECT_DOUBLE_EQ(stats.mean, 2.0);
  EXPECT_DOUBLE_EQ(stats.std, 1.0);
  EXPECT_NEAR(out[0], -1.0, 1e-12);
  EXPECT_NEAR(out[1], 1.0, 1e-12);
}

TEST(Revin, DenormalizeExamples) {
  std::vector<double> zeros{0, 0};
  EXPECT_EQ(data::revin_denormalize(zeros, {2.0, 1.0, 1e-5}), (std::vector<double>{2, 2}));
  std::vector<double> one{1};
  EXPECT_EQ(data::revin_denormalize(one, {0.0, 3.0, 1e-5}), (std::vector<double>{3}));
}

TEST(Revin, RoundTripOnRandomHistories) {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(-50, 50);
  std::uniform_real_distribution<double> tiny(-1e-7, 1e-7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> h(1 + trial % 97);
    const double base = u(gen);
    const bool near_constant = trial % 4 == 0;
    for (auto& v : h) v = near_constant ? base + tiny(gen) : u(gen);
    auto [norm, stats] = data::revin_normalize(h);
    if (stats.std > stats.eps) {
      double m = 0, s = 0;
      for (double v : norm) m += v;
      m /= norm.size();
      for (double v : norm) s += (v - m) * (v - m);
      EXPECT_NEAR(m, 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt(s / norm.size()), 1.0, 1e-9);
    }
    auto back = data::revin_denormalize(norm, stats);
    for (std::size_t i = 0; i < h.size(); ++i) {
      EXPECT_LE(std::abs(back[i] - h[i]), 1e-6 * std::max(1.0, std::abs(h[i])));
    }
  }
}

}  // namespace
