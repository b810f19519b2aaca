// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Weight manifest: a JSON index (name -> shape, dtype, offset, length) beside
// a raw little-endian f32 blob. Used for pretrained LM weights and for
// training checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semfuse/numerics/tensor.hpp"

namespace semfuse::semlm {

struct ManifestEntry {
  std::string name;
  num::Shape shape;
  std::string dtype = "f32";
  std::uint64_t offset = 0;  // bytes into the blob
  std::uint64_t length = 0;  // bytes
};

struct NamedArray {
  std::string name;
  num::Shape shape;
  std::vector<float> values;
};

class WeightManifest {
 public:
  /// Reads and validates the index: dtype f32, length = 4 * numel, ranges
  /// inside the blob and pairwise disjoint. Throws LoadError.
  static WeightManifest read(const std::filesystem::path& index_path);

  /// Writes `<index_path>` and the blob named in it (`<stem>.bin`).
  static void write(const std::filesystem::path& index_path, const std::vector<NamedArray>& arrays,
                    const std::map<std::string, std::string>& metadata = {});

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const ManifestEntry* find(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }

  /// Values of `name`; LoadError naming the tensor when absent or when its
  /// shape differs from `expected` (if given).
  std::vector<float> load(const std::string& name, const num::Shape* expected = nullptr) const;

  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  const std::filesystem::path& blob_path() const { return blob_path_; }

 private:
  std::vector<ManifestEntry> entries_;
  std::map<std::string, std::string> metadata_;
  std::filesystem::path blob_path_;
  std::uint64_t blob_size_ = 0;
};

}  // namespace semfuse::semlm
