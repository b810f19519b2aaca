// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/semlm/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "semfuse/errors.hpp"

namespace semfuse::semlm {

namespace {

std::string utf8(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

// Splits a UTF-8 string into code-point substrings.
std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

const std::unordered_map<std::string, unsigned char>& unicode_to_byte() {
  static const auto table = [] {
    std::unordered_map<std::string, unsigned char> m;
    const auto& fwd = byte_to_unicode();
    for (int b = 0; b < 256; ++b) m[fwd[b]] = static_cast<unsigned char>(b);
    return m;
  }();
  return table;
}

bool is_letter(unsigned char c) { return std::isalpha(c) || c >= 0x80; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string pair_key(const std::string& a, const std::string& b) { return a + ' ' + b; }

}  // namespace

const std::vector<std::string>& byte_to_unicode() {
  static const auto table = [] {
    std::vector<std::string> out(256);
    std::vector<bool> printable(256, false);
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    std::uint32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      out[b] = utf8(printable[b] ? static_cast<std::uint32_t>(b) : next++);
    }
    return out;
  }();
  return table;
}

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  auto at = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  std::size_t i = 0;
  while (i < n) {
    // Contractions.
    if (text[i] == '\'') {
      bool matched = false;
      for (std::string_view suf : {"ll", "re", "ve", "s", "t", "m", "d"}) {
        if (text.substr(i + 1, suf.size()) == suf) {
          out.emplace_back(text.substr(i, 1 + suf.size()));
          i += 1 + suf.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    const std::size_t start = i;
    const std::size_t body = (text[i] == ' ' && i + 1 < n) ? i + 1 : i;
    const unsigned char c = at(body);
    if (!is_space(c)) {
      std::size_t j = body;
      if (is_letter(c)) {
        while (j < n && is_letter(at(j))) ++j;
      } else if (is_digit(c)) {
        while (j < n && is_digit(at(j))) ++j;
      } else {
        while (j < n && !is_space(at(j)) && !is_letter(at(j)) && !is_digit(at(j))) ++j;
      }
      out.emplace_back(text.substr(start, j - start));
      i = j;
      continue;
    }
    // Whitespace run; leave one trailing space for a following word.
    std::size_t j = i;
    while (j < n && is_space(at(j))) ++j;
    if (j < n && j - i > 1) --j;
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Tokenizer Tokenizer::byte_fallback() {
  Tokenizer t;
  t.fallback_ = true;
  return t;
}

Tokenizer Tokenizer::from_tables(std::unordered_map<std::string, std::int64_t> vocab,
                                 std::vector<std::pair<std::string, std::string>> merges) {
  Tokenizer t;
  t.fallback_ = false;
  std::int64_t max_id = -1;
  for (const auto& [tok, id] : vocab) {
    if (id < 0) throw LoadError("negative token id for '" + tok + "'");
    max_id = std::max(max_id, id);
  }
  t.id_to_token_.assign(static_cast<std::size_t>(max_id + 1), std::string());
  for (const auto& [tok, id] : vocab) t.id_to_token_[static_cast<std::size_t>(id)] = tok;
  t.vocab_ = std::move(vocab);
  for (std::size_t r = 0; r < merges.size(); ++r) {
    t.ranks_.emplace(pair_key(merges[r].first, merges[r].second), r);
  }
  return t;
}

Tokenizer Tokenizer::from_files(const std::filesystem::path& vocab_json,
                                const std::filesystem::path& merges_txt) {
  for (const auto& p : {vocab_json, merges_txt}) {
    if (!std::filesystem::exists(p)) {
      throw ConfigError("tokenizer file not found: " + p.string());
    }
  }
  std::unordered_map<std::string, std::int64_t> vocab;
  try {
    std::ifstream in(vocab_json);
    const auto doc = nlohmann::json::parse(in);
    if (!doc.is_object()) throw LoadError(vocab_json.string() + ": expected a JSON object");
    for (const auto& [k, v] : doc.items()) vocab.emplace(k, v.get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(vocab_json.string() + ": " + e.what());
  }
  std::vector<std::pair<std::string, std::string>> merges;
  std::ifstream in(merges_txt);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() ||
        line.find(' ', sp + 1) != std::string::npos) {
      throw LoadError(merges_txt.string() + ":" + std::to_string(lineno) +
                      ": expected two space-separated symbols");
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return from_tables(std::move(vocab), std::move(merges));
}

std::size_t Tokenizer::vocab_size() const {
  return fallback_ ? 256 : id_to_token_.size();
}

std::vector<std::string> Tokenizer::bpe(const std::string& word) const {
  auto symbols = utf8_chars(word);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  while (symbols.size() > 1) {
    std::size_t best = kNone;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_at = i;
      }
    }
    if (best == kNone) break;
    // Merge every occurrence of the winning pair, left to right.
    const std::string left = symbols[best_at], right = symbols[best_at + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(symbols[i]);
        ++i;
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<std::int64_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int64_t> ids;
  if (fallback_) {
    ids.reserve(text.size());
    for (char c : text) ids.push_back(static_cast<unsigned char>(c));
    return ids;
  }
  const auto& b2u = byte_to_unicode();
  for (const auto& piece : pretokenize(text)) {
    std::string word;
    for (char c : piece) word += b2u[static_cast<unsigned char>(c)];
    for (const auto& sym : bpe(word)) {
      auto it = vocab_.find(sym);
      if (it == vocab_.end()) throw ContractError("token '" + sym + "' missing from vocabulary");
      ids.push_back(it->second);
    }
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<std::int64_t>& ids) const {
  std::string out;
  if (fallback_) {
    for (auto id : ids) {
      if (id < 0 || id > 255) throw ContractError("byte id out of range: " + std::to_string(id));
      out.push_back(static_cast<char>(id));
    }
    return out;
  }
  const auto& u2b = unicode_to_byte();
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw ContractError("token id out of range: " + std::to_string(id));
    }
    for (const auto& ch : utf8_chars(id_to_token_[static_cast<std::size_t>(id)])) {
      auto it = u2b.find(ch);
      if (it == u2b.end()) throw ContractError("token contains a non-byte symbol");
      out.push_back(static_cast<char>(it->second));
    }
  }
  return out;
}

}  // namespace semfuse::semlm
