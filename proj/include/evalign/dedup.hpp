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

// Near-duplicate removal for sampled evidence.
//
// Sampled extractions are heavily skewed toward a few head responses.
// `dedup` keeps the earliest sample of every near-duplicate cluster so the
// surviving candidates are roughly uniform over distinct answers.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evalign/core_model.hpp"
#include "evalign/errors.hpp"
#include "evalign/text.hpp"

namespace evalign {

struct DedupConfig {
  int n = 2;
  double threshold = 0.8;
  // Word n-grams when true, character n-grams over the normalized text
  // otherwise.
  bool word_level = true;

  void validate() const {
    if (n < 1) throw ConfigError("dedup: n must be >= 1");
    if (!(threshold > 0.0 && threshold <= 1.0))
      throw ConfigError("dedup: threshold must be in (0, 1]");
  }
};

namespace detail {

inline std::vector<std::string> dedup_units(std::string_view text,
                                            bool word_level) {
  auto words = normalize(text);
  if (word_level) return words;
  std::vector<std::string> chars;
  std::string flat = join(words, " ");
  chars.reserve(flat.size());
  for (char c : flat) chars.emplace_back(1, c);
  return chars;
}

inline TokenCounts ngram_counts(const std::vector<std::string>& units, int n) {
  TokenCounts counts;
  const auto order = static_cast<std::size_t>(n);
  if (units.size() < order) return counts;
  for (std::size_t i = 0; i + order <= units.size(); ++i) {
    std::string gram = units[i];
    for (std::size_t k = 1; k < order; ++k) {
      gram.push_back('\x1f');
      gram += units[i + k];
    }
    ++counts[gram];
  }
  return counts;
}

// Precomputed n-gram and unigram multisets for one text.
struct NgramProfile {
  std::size_t length = 0;
  TokenCounts grams;
  TokenCounts unigrams;
  std::int64_t gram_total = 0;
  std::int64_t unigram_total = 0;

  NgramProfile(std::string_view text, const DedupConfig& cfg) {
    auto units = dedup_units(text, cfg.word_level);
    length = units.size();
    grams = ngram_counts(units, cfg.n);
    unigrams = ngram_counts(units, 1);
    for (const auto& [g, c] : grams) gram_total += c;
    unigram_total = static_cast<std::int64_t>(length);
  }
};

inline double dice(const NgramProfile& a, const NgramProfile& b,
                   const DedupConfig& cfg) {
  if (a.length == 0 && b.length == 0) return 1.0;
  if (a.length == 0 || b.length == 0) return 0.0;
  const auto order = static_cast<std::size_t>(cfg.n);
  // Either side too short for the configured order: compare unigrams.
  const bool unigram = a.length < order || b.length < order;
  const auto& ga = unigram ? a.unigrams : a.grams;
  const auto& gb = unigram ? b.unigrams : b.grams;
  const double total = unigram
                           ? static_cast<double>(a.unigram_total + b.unigram_total)
                           : static_cast<double>(a.gram_total + b.gram_total);
  return 2.0 * static_cast<double>(multiset_overlap(ga, gb)) / total;
}

}  // namespace detail

// Dice coefficient over n-gram multisets of normalized tokens.
inline double ngram_similarity(std::string_view a, std::string_view b,
                               const DedupConfig& cfg = {}) {
  cfg.validate();
  return detail::dice(detail::NgramProfile(a, cfg),
                      detail::NgramProfile(b, cfg), cfg);
}

// Greedy single pass: a sample survives iff its similarity to every
// survivor so far is below the threshold.
inline CandidateSet dedup(std::string query_id,
                          std::span<const std::string> samples,
                          const DedupConfig& cfg = {}) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("no samples");
  CandidateSet out;
  out.query_id = std::move(query_id);
  out.deduped = true;
  std::vector<detail::NgramProfile> kept;
  for (const auto& sample : samples) {
    detail::NgramProfile profile(sample, cfg);
    bool duplicate = false;
    for (const auto& k : kept) {
      if (detail::dice(profile, k, cfg) >= cfg.threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      kept.push_back(std::move(profile));
      out.candidates.push_back(sample);
    }
  }
  return out;
}

inline CandidateSet dedup(const CandidateSet& samples,
                          const DedupConfig& cfg = {}) {
  CandidateSet out = dedup(samples.query_id, samples.candidates, cfg);
  out.extra = samples.extra;
  return out;
}

}  // namespace evalign
