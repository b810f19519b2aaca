// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/semlm/manifest.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "semfuse/errors.hpp"

namespace semfuse::semlm {

namespace {

constexpr const char* kFormat = "semfuse-weights-v1";

void to_little_endian(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = __builtin_bswap32(u);
      f = std::bit_cast<float>(u);
    }
  }
}

}  // namespace

WeightManifest WeightManifest::read(const std::filesystem::path& index_path) {
  if (!std::filesystem::exists(index_path)) {
    throw LoadError("weight manifest not found: " + index_path.string());
  }
  nlohmann::json doc;
  try {
    std::ifstream in(index_path);
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(index_path.string() + ": " + e.what());
  }
  WeightManifest m;
  try {
    if (doc.value("format", std::string()) != kFormat) {
      throw LoadError(index_path.string() + ": unknown format (expected " + kFormat + ")");
    }
    m.blob_path_ = index_path.parent_path() / doc.at("blob").get<std::string>();
    if (doc.contains("metadata")) {
      for (const auto& [k, v] : doc["metadata"].items()) m.metadata_[k] = v.get<std::string>();
    }
    for (const auto& [name, e] : doc.at("tensors").items()) {
      ManifestEntry entry;
      entry.name = name;
      entry.shape = e.at("shape").get<num::Shape>();
      entry.dtype = e.at("dtype").get<std::string>();
      entry.offset = e.at("offset").get<std::uint64_t>();
      entry.length = e.at("length").get<std::uint64_t>();
      m.entries_.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(index_path.string() + ": " + e.what());
  }
  if (!std::filesystem::exists(m.blob_path_)) {
    throw LoadError("weight blob not found: " + m.blob_path_.string());
  }
  m.blob_size_ = std::filesystem::file_size(m.blob_path_);

  for (const auto& e : m.entries_) {
    if (e.dtype != "f32") throw LoadError("tensor " + e.name + ": unsupported dtype " + e.dtype);
    if (e.length != 4 * num::shape_numel(e.shape)) {
      throw LoadError("tensor " + e.name + ": length " + std::to_string(e.length) +
                      " does not match shape " + num::shape_str(e.shape));
    }
    if (e.offset > m.blob_size_ || e.length > m.blob_size_ - e.offset) {
      throw LoadError("tensor " + e.name + ": byte range exceeds blob size " +
                      std::to_string(m.blob_size_));
    }
  }
  std::vector<const ManifestEntry*> by_offset;
  for (const auto& e : m.entries_) {
    if (e.length > 0) by_offset.push_back(&e);
  }
  std::sort(by_offset.begin(), by_offset.end(),
            [](auto* a, auto* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i - 1]->offset + by_offset[i - 1]->length > by_offset[i]->offset) {
      throw LoadError("tensors " + by_offset[i - 1]->name + " and " + by_offset[i]->name +
                      " overlap in the blob");
    }
  }
  return m;
}

void WeightManifest::write(const std::filesystem::path& index_path,
                           const std::vector<NamedArray>& arrays,
                           const std::map<std::string, std::string>& metadata) {
  if (index_path.has_parent_path()) std::filesystem::create_directories(index_path.parent_path());
  const auto blob_name = index_path.stem().string() + ".bin";
  std::ofstream blob(index_path.parent_path() / blob_name, std::ios::binary | std::ios::trunc);
  if (!blob) throw LoadError("cannot write " + (index_path.parent_path() / blob_name).string());

  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    if (a.values.size() != num::shape_numel(a.shape)) {
      throw ContractError("array " + a.name + " has " + std::to_string(a.values.size()) +
                          " values for shape " + num::shape_str(a.shape));
    }
    if (tensors.contains(a.name)) throw ContractError("duplicate tensor name " + a.name);
    auto le = a.values;
    to_little_endian(le);
    const std::uint64_t length = 4 * le.size();
    blob.write(reinterpret_cast<const char*>(le.data()), static_cast<std::streamsize>(length));
    tensors[a.name] = {{"shape", a.shape}, {"dtype", "f32"}, {"offset", offset}, {"length", length}};
    offset += length;
  }
  nlohmann::ordered_json doc;
  doc["format"] = kFormat;
  doc["blob"] = blob_name;
  doc["metadata"] = metadata;
  doc["tensors"] = std::move(tensors);
  std::ofstream out(index_path, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + index_path.string());
  out << doc.dump(1) << '\n';
}

const ManifestEntry* WeightManifest::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<float> WeightManifest::load(const std::string& name, const num::Shape* expected) const {
  const auto* e = find(name);
  if (!e) throw LoadError("tensor " + name + " missing from manifest");
  if (expected && e->shape != *expected) {
    throw LoadError("tensor " + name + " has shape " + num::shape_str(e->shape) + ", expected " +
                    num::shape_str(*expected));
  }
  std::vector<float> out(e->length / 4);
  std::ifstream in(blob_path_, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(e->offset));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(e->length));
  if (!in) throw LoadError("short read for tensor " + name);
  to_little_endian(out);  // involution: converts back to native order
  return out;
}

}  // namespace semfuse::semlm
