// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace semfuse::semlm {

/// GPT-2 style byte-level BPE, or a byte-fallback mode where id = byte value.
class Tokenizer {
 public:
  /// 256-entry vocabulary, no merges.
  static Tokenizer byte_fallback();
  /// JSON vocabulary (token string -> id) and a merges file with one
  /// space-separated pair per line; a leading "#version" line is skipped and
  /// rank is the index among the remaining lines. Throws ConfigError when a
  /// file is missing and LoadError when one is malformed.
  static Tokenizer from_files(const std::filesystem::path& vocab_json,
                              const std::filesystem::path& merges_txt);
  /// In-memory construction; tokens are in byte-to-unicode form.
  static Tokenizer from_tables(std::unordered_map<std::string, std::int64_t> vocab,
                               std::vector<std::pair<std::string, std::string>> merges);

  std::vector<std::int64_t> encode(std::string_view text) const;
  std::string decode(const std::vector<std::int64_t>& ids) const;

  bool is_byte_fallback() const { return fallback_; }
  std::size_t vocab_size() const;

  /// Merged symbols of one pre-token (already mapped to byte-unicode form).
  std::vector<std::string> bpe(const std::string& word) const;

 private:
  Tokenizer() = default;

  bool fallback_ = true;
  std::unordered_map<std::string, std::int64_t> vocab_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> ranks_;  // "left right" -> rank
};

/// The printable-unicode alias of each byte used by byte-level BPE, UTF-8 encoded.
const std::vector<std::string>& byte_to_unicode();

/// Splits text into pre-tokens: contractions, optional-space letter runs,
/// digit runs, punctuation runs and whitespace. Non-ASCII bytes count as letters.
std::vector<std::string> pretokenize(std::string_view text);

}  // namespace semfuse::semlm
