// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic CSV fixtures written on demand into a scratch directory.

#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

namespace semfuse::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "semfuse_tests" / name;
  std::filesystem::create_directories(dir);
  return dir;
}

/// ETT-style layout: date column plus seven load/temperature channels built
/// from daily and weekly cycles, a slow trend and seeded noise.
inline std::filesystem::path write_ett_like_csv(const std::filesystem::path& path,
                                                std::size_t rows, unsigned seed = 7) {
  static const char* kNames[] = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  std::mt19937 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::ofstream out(path);
  out << "date";
  for (auto* n : kNames) out << ',' << n;
  out << '\n';
  out << std::setprecision(10);
  for (std::size_t t = 0; t < rows; ++t) {
    out << "2016-07-01 " << (t % 24) << ":00:00";
    for (int c = 0; c < 7; ++c) {
      const double day = std::sin(2.0 * M_PI * (static_cast<double>(t) + 3.0 * c) / 24.0);
      const double week = std::cos(2.0 * M_PI * static_cast<double>(t) / 168.0 + c);
      const double v = 5.0 + c + (1.0 + 0.2 * c) * day + 0.5 * week +
                       0.001 * static_cast<double>(t) + noise(gen);
      out << ',' << v;
    }
    out << '\n';
  }
  return path;
}

/// Single-channel sine: unit amplitude, given period, no date column.
inline std::filesystem::path write_sine_csv(const std::filesystem::path& path, std::size_t rows,
                                            double period) {
  std::ofstream out(path);
  out << "value\n" << std::setprecision(17);
  for (std::size_t t = 0; t < rows; ++t) {
    out << std::sin(2.0 * M_PI * static_cast<double>(t) / period) << '\n';
  }
  return path;
}

/// Generic numeric table with optional leading date column.
inline std::filesystem::path write_table_csv(const std::filesystem::path& path, std::size_t rows,
                                             std::size_t cols, bool with_date) {
  std::ofstream out(path);
  if (with_date) out << "date,";
  for (std::size_t c = 0; c < cols; ++c) out << (c ? "," : "") << "f" << c;
  out << '\n';
  for (std::size_t t = 0; t < rows; ++t) {
    if (with_date) out << "2002-01-" << (t % 28 + 1) << ',';
    for (std::size_t c = 0; c < cols; ++c) out << (c ? "," : "") << (t * 0.5 + c);
    out << '\n';
  }
  return path;
}

}  // namespace semfuse::testing
