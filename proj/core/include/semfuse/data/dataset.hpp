// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semfuse::data {

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  /// 6:2:2, used for the ETT family.
  static SplitRatios ett() { return {0.6, 0.2, 0.2}; }
  /// 7:1:2, used for every other dataset.
  static SplitRatios standard() { return {0.7, 0.1, 0.2}; }
  /// Picks 6:2:2 for names starting with "ETT", 7:1:2 otherwise.
  static SplitRatios for_dataset(std::string_view name);

  void validate() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

struct SplitRanges {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Multivariate series stored channel-contiguous so a channel segment is a
/// plain span. Immutable once built; windows hold spans into it.
class SeriesDataset {
 public:
  SeriesDataset() = default;
  /// `row_major` is timestep x channel.
  SeriesDataset(const std::vector<double>& row_major, std::size_t steps, std::size_t channels,
                std::vector<std::string> channel_names);

  std::size_t steps() const { return steps_; }
  std::size_t channels() const { return channels_; }
  const std::vector<std::string>& channel_names() const { return names_; }

  double value(std::size_t t, std::size_t c) const { return data_[c * steps_ + t]; }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * steps_, steps_};
  }

  const std::optional<SplitRanges>& splits() const { return splits_; }
  const std::optional<SplitRatios>& ratios() const { return ratios_; }
  IndexRange range(Split split) const;
  /// Statistics used by Z-score normalization; empty until normalized.
  const std::vector<ChannelStats>& train_stats() const { return train_stats_; }

  SeriesDataset with_splits(SplitRatios ratios, std::size_t min_split_len = 0) const;

  /// Maps a normalized value of channel `c` back to original units.
  double to_original_units(std::size_t c, double z) const;

 private:
  friend SeriesDataset zscore_fit_apply(const SeriesDataset& ds);

  std::vector<double> data_;
  std::size_t steps_ = 0;
  std::size_t channels_ = 0;
  std::vector<std::string> names_;
  std::optional<SplitRatios> ratios_;
  std::optional<SplitRanges> splits_;
  std::vector<ChannelStats> train_stats_;
};

/// One channel-separated supervised example. Spans point into the dataset,
/// which must outlive the window.
struct SeriesWindow {
  std::span<const double> history;
  std::span<const double> target;
  std::size_t channel = 0;
  /// Absolute timestep of history[0].
  std::size_t origin = 0;
};

enum class DateColumn { kDetect, kPresent, kAbsent };

/// Comma-separated file with one header row. A leading date/time column is
/// dropped (detected by header name under kDetect).
SeriesDataset load_csv(const std::filesystem::path& path, DateColumn date = DateColumn::kDetect);

/// Contiguous ranges; floor arithmetic with the remainder given to test.
/// Throws InsufficientDataError when any range is shorter than `min_split_len`.
SplitRanges chronological_split(std::size_t steps, SplitRatios ratios,
                                std::size_t min_split_len = 0);

/// Standardizes every channel with mean/population-std of the train split.
SeriesDataset zscore_fit_apply(const SeriesDataset& ds);

/// Channel-major enumeration: every valid origin of channel 0, then channel 1, ...
std::vector<SeriesWindow> make_windows(const SeriesDataset& ds, Split split,
                                       std::size_t history_len, std::size_t horizon,
                                       std::size_t stride = 1);

/// Number of windows per channel for a split of length `split_len`.
std::size_t windows_per_channel(std::size_t split_len, std::size_t history_len,
                                std::size_t horizon, std::size_t stride = 1);

}  // namespace semfuse::data
