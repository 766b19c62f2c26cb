/*
 * Copyright 2026 The evalign Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evalign {

// Name of the normalization rule below; written into evaluation outputs so
// numbers produced under different rules are never mixed up.
inline constexpr std::string_view kNormalizationRule =
    "lowercase-ascii,strip-ascii-punct,collapse-whitespace";

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

inline char to_lower_ascii(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Lowercase (ASCII only), drop ASCII punctuation, split on whitespace.
// Non-ASCII bytes pass through untouched, so UTF-8 text stays intact.
inline std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_ascii_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!is_ascii_punct(c)) {
      current.push_back(to_lower_ascii(c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Plain whitespace split with no other transformation.
inline std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_blank(std::string_view text) {
  for (char c : text)
    if (!is_ascii_space(c)) return false;
  return true;
}

inline std::string join(std::span<const std::string> parts,
                        std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

using TokenCounts = std::unordered_map<std::string, std::int64_t>;

inline TokenCounts count_tokens(std::span<const std::string> tokens) {
  TokenCounts counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

// Size of the multiset intersection.
inline std::int64_t multiset_overlap(const TokenCounts& a,
                                     const TokenCounts& b) {
  const TokenCounts& small = a.size() <= b.size() ? a : b;
  const TokenCounts& large = a.size() <= b.size() ? b : a;
  std::int64_t overlap = 0;
  for (const auto& [tok, n] : small) {
    auto it = large.find(tok);
    if (it != large.end()) overlap += std::min(n, it->second);
  }
  return overlap;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace evalign
