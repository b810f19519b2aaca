// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "semfuse/errors.hpp"

namespace semfuse::data {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  for (;;) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

bool looks_like_date_header(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name == "date" || name == "time" || name == "datetime" || name == "timestamp" ||
         name == "ds";
}

std::size_t floor_count(double ratio, std::size_t steps) {
  // Guard against 0.7 * 100 landing at 69.999...
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(steps) + 1e-9));
}

}  // namespace

SplitRatios SplitRatios::for_dataset(std::string_view name) {
  return name.substr(0, 3) == "ETT" ? ett() : standard();
}

void SplitRatios::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

SeriesDataset::SeriesDataset(const std::vector<double>& row_major, std::size_t steps,
                             std::size_t channels, std::vector<std::string> channel_names)
    : data_(row_major.size()), steps_(steps), channels_(channels), names_(std::move(channel_names)) {
  if (row_major.size() != steps * channels) {
    throw FormatError("dataset values do not match steps x channels");
  }
  if (names_.size() != channels) throw FormatError("one name per channel required");
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t c = 0; c < channels; ++c) data_[c * steps + t] = row_major[t * channels + c];
}

IndexRange SeriesDataset::range(Split split) const {
  if (!splits_) throw ContractError("dataset has no split boundaries");
  switch (split) {
    case Split::kTrain: return splits_->train;
    case Split::kVal: return splits_->val;
    case Split::kTest: return splits_->test;
  }
  return {};
}

SeriesDataset SeriesDataset::with_splits(SplitRatios ratios, std::size_t min_split_len) const {
  SeriesDataset out = *this;
  out.splits_ = chronological_split(steps_, ratios, min_split_len);
  out.ratios_ = ratios;
  return out;
}

double SeriesDataset::to_original_units(std::size_t c, double z) const {
  if (train_stats_.empty()) return z;
  return z * train_stats_.at(c).std + train_stats_.at(c).mean;
}

SeriesDataset load_csv(const std::filesystem::path& path, DateColumn date) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw FormatError(path.string() + ": empty file (no header row)");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  bool drop_first = false;
  switch (date) {
    case DateColumn::kPresent: drop_first = true; break;
    case DateColumn::kAbsent: drop_first = false; break;
    case DateColumn::kDetect: drop_first = looks_like_date_header(header.front()); break;
  }
  const std::size_t first = drop_first ? 1 : 0;
  if (header.size() <= first) throw FormatError(path.string() + ": no numeric columns");
  std::vector<std::string> names(header.begin() + first, header.end());
  const std::size_t channels = names.size();

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    for (std::size_t c = first; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + " ('" + header[c] + "'): cannot parse '" +
                         cell + "' as a finite number");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": no data rows");
  return SeriesDataset(values, rows, channels, std::move(names));
}

SplitRanges chronological_split(std::size_t steps, SplitRatios ratios, std::size_t min_split_len) {
  ratios.validate();
  const std::size_t n_train = floor_count(ratios.train, steps);
  const std::size_t n_val = floor_count(ratios.val, steps);
  if (n_train + n_val > steps) throw InsufficientDataError("split ratios exceed series length");
  SplitRanges out{{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, steps}};
  for (const auto& [name, r] : {std::pair{"train", out.train}, std::pair{"val", out.val},
                                std::pair{"test", out.test}}) {
    if (r.size() == 0 || r.size() < min_split_len) {
      throw InsufficientDataError(std::string(name) + " split has " + std::to_string(r.size()) +
                                  " steps, need at least " +
                                  std::to_string(std::max<std::size_t>(min_split_len, 1)));
    }
  }
  return out;
}

SeriesDataset zscore_fit_apply(const SeriesDataset& ds) {
  if (!ds.splits_) throw ContractError("zscore_fit_apply needs split boundaries");
  const IndexRange train = ds.splits_->train;
  if (train.size() == 0) throw InsufficientDataError("train split is empty");
  SeriesDataset out = ds;
  out.train_stats_.assign(ds.channels_, {});
  for (std::size_t c = 0; c < ds.channels_; ++c) {
    const double* col = ds.data_.data() + c * ds.steps_;
    double mean = 0.0;
    for (std::size_t t = train.begin; t < train.end; ++t) mean += col[t];
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (std::size_t t = train.begin; t < train.end; ++t) var += (col[t] - mean) * (col[t] - mean);
    var /= static_cast<double>(train.size());
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      throw ConstantChannelError("channel '" + ds.names_[c] +
                                 "' has zero standard deviation on the train split");
    }
    out.train_stats_[c] = {mean, sd};
    double* dst = out.data_.data() + c * ds.steps_;
    for (std::size_t t = 0; t < ds.steps_; ++t) dst[t] = (col[t] - mean) / sd;
  }
  return out;
}

std::size_t windows_per_channel(std::size_t split_len, std::size_t history_len,
                                std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw ConfigError("window stride must be positive");
  const std::size_t need = history_len + horizon;
  if (split_len < need) return 0;
  return (split_len - need) / stride + 1;
}

std::vector<SeriesWindow> make_windows(const SeriesDataset& ds, Split split,
                                       std::size_t history_len, std::size_t horizon,
                                       std::size_t stride) {
  const IndexRange r = ds.range(split);
  if (history_len == 0 || horizon == 0) throw ConfigError("history and horizon must be positive");
  const std::size_t per_channel = windows_per_channel(r.size(), history_len, horizon, stride);
  if (per_channel == 0) {
    throw InsufficientDataError(std::string(split_name(split)) + " split has " +
                                std::to_string(r.size()) + " steps, need at least " +
                                std::to_string(history_len + horizon));
  }
  std::vector<SeriesWindow> out;
  out.reserve(per_channel * ds.channels());
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    auto col = ds.channel(c);
    for (std::size_t w = 0; w < per_channel; ++w) {
      const std::size_t origin = r.begin + w * stride;
      out.push_back({col.subspan(origin, history_len), col.subspan(origin + history_len, horizon), c,
                     origin});
    }
  }
  return out;
}

}  // namespace semfuse::data
