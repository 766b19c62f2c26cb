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

// QA metrics (containment EM, unigram F1, evidence length) and the
// noise-injection harness used for robustness runs.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evalign/core_model.hpp"
#include "evalign/errors.hpp"
#include "evalign/experts.hpp"
#include "evalign/text.hpp"

namespace evalign {

// 1 iff some gold's normalized tokens occur as a contiguous run in the
// normalized response.
inline int exact_match(std::string_view response,
                       std::span<const std::string> golds) {
  if (golds.empty()) throw ValidationError("exact_match needs gold answers");
  const auto resp = normalize(response);
  for (const auto& g : golds) {
    const auto gold = normalize(g);
    if (gold.empty()) continue;
    if (std::search(resp.begin(), resp.end(), gold.begin(), gold.end()) !=
        resp.end())
      return 1;
  }
  return 0;
}

inline double unigram_f1_single(std::string_view response,
                                std::string_view gold) {
  const auto r = normalize(response);
  const auto g = normalize(gold);
  if (r.empty() && g.empty()) return 1.0;
  if (r.empty() || g.empty()) return 0.0;
  const auto overlap = multiset_overlap(count_tokens(r), count_tokens(g));
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(r.size());
  const double rc = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * p * rc / (p + rc);
}

// Best F1 over the golds.
inline double unigram_f1(std::string_view response,
                         std::span<const std::string> golds) {
  if (golds.empty()) throw ValidationError("unigram_f1 needs gold answers");
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, unigram_f1_single(response, g));
  return best;
}

// ---------------------------------------------------------------------------
// Token counters. Counts from different counters are not comparable, so every
// result carries the counter's name.

struct TokenCounter {
  std::string name;
  std::function<std::int64_t(std::string_view)> count;
};

inline std::int64_t count_utf8_chars(std::string_view text) {
  std::int64_t n = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

inline const std::map<std::string, TokenCounter>& token_counters() {
  static const std::map<std::string, TokenCounter> counters = {
      {"whitespace",
       {"whitespace",
        [](std::string_view t) {
          return static_cast<std::int64_t>(split_whitespace(t).size());
        }}},
      {"normalized",
       {"normalized",
        [](std::string_view t) {
          return static_cast<std::int64_t>(normalize(t).size());
        }}},
      {"utf8-chars", {"utf8-chars", count_utf8_chars}},
  };
  return counters;
}

inline const TokenCounter& token_counter(const std::string& name) {
  const auto& all = token_counters();
  auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown token counter '" + name + "'");
  return it->second;
}

inline std::int64_t token_count(std::string_view text,
                                const std::string& counter = "whitespace") {
  return token_counter(counter).count(text);
}

inline void validate(const GeneratorResponse& r) {
  const auto expected = token_count(r.output, r.counter_name);
  if (expected != r.token_count)
    throw ValidationError("response '" + r.query_id + "': token_count " +
                          std::to_string(r.token_count) + " but counter '" +
                          r.counter_name + "' gives " +
                          std::to_string(expected));
}

inline std::vector<GeneratorResponse> load_responses(
    const std::filesystem::path& path) {
  auto responses = load_jsonl<GeneratorResponse>(path);
  for (const auto& r : responses) validate(r);
  return responses;
}

// Drops golds longer than `max_tokens` normalized tokens; records left with
// no gold are dropped too.
inline std::vector<QueryRecord> filter_long_answers(
    std::span<const QueryRecord> records, std::size_t max_tokens) {
  std::vector<QueryRecord> out;
  for (const auto& r : records) {
    QueryRecord kept = r;
    kept.gold_answers.clear();
    for (const auto& g : r.gold_answers)
      if (normalize(g).size() <= max_tokens) kept.gold_answers.push_back(g);
    if (!kept.gold_answers.empty()) out.push_back(std::move(kept));
  }
  return out;
}

struct EvalResult {
  std::string query_id;
  int em = 0;
  double f1 = 0.0;
  std::int64_t tok = 0;
  std::string counter_name = "whitespace";

  bool operator==(const EvalResult&) const = default;
};

inline void to_json(json& j, const EvalResult& r) {
  j = json{{"query_id", r.query_id},
           {"em", r.em},
           {"f1", r.f1},
           {"tok", r.tok},
           {"counter_name", r.counter_name},
           {"normalization", std::string(kNormalizationRule)}};
}

inline void from_json(const json& j, EvalResult& r) {
  r.query_id = detail::require_string(j, "query_id");
  r.em = static_cast<int>(detail::require_int(j, "em"));
  r.f1 = detail::require_number(j, "f1");
  r.tok = detail::require_int(j, "tok");
  r.counter_name = detail::require_string(j, "counter_name");
}

// Scores responses against their records. `tok` measures the extracted
// evidence when `evidence` has an entry for the query, otherwise the
// response itself. Responses whose record was filtered out are skipped.
inline std::vector<EvalResult> evaluate(
    std::span<const QueryRecord> records,
    std::span<const GeneratorResponse> responses, const std::string& counter,
    const std::unordered_map<std::string, std::string>& evidence = {}) {
  const auto& tc = token_counter(counter);
  std::unordered_map<std::string, const QueryRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::vector<EvalResult> out;
  for (const auto& resp : responses) {
    auto it = by_id.find(resp.query_id);
    if (it == by_id.end()) continue;
    const auto& golds = it->second->gold_answers;
    EvalResult r;
    r.query_id = resp.query_id;
    r.em = exact_match(resp.output, golds);
    r.f1 = unigram_f1(resp.output, golds);
    auto ev = evidence.find(resp.query_id);
    r.tok = tc.count(ev != evidence.end() ? std::string_view(ev->second)
                                          : std::string_view(resp.output));
    r.counter_name = tc.name;
    out.push_back(std::move(r));
  }
  return out;
}

struct EvalSummary {
  std::size_t n = 0;
  double em = 0.0;
  double f1 = 0.0;
  double tok = 0.0;
};

inline EvalSummary summarize(std::span<const EvalResult> results) {
  EvalSummary s;
  s.n = results.size();
  if (s.n == 0) return s;
  for (const auto& r : results) {
    s.em += r.em;
    s.f1 += r.f1;
    s.tok += static_cast<double>(r.tok);
  }
  const double n = static_cast<double>(s.n);
  s.em /= n;
  s.f1 /= n;
  s.tok /= n;
  return s;
}

// ---------------------------------------------------------------------------
// Noise injection.

struct TaggedPassage {
  std::string text;
  bool relevant = false;
  // Index into the record's relevant passages or into the distractor pool.
  std::size_t source_index = 0;

  bool operator==(const TaggedPassage&) const = default;
};

struct NoiseMix {
  std::string query_id;
  int nsr_percent = 0;
  std::uint64_t seed = 0;
  std::vector<TaggedPassage> passages;

  std::size_t relevant_count() const {
    return static_cast<std::size_t>(std::count_if(
        passages.begin(), passages.end(),
        [](const TaggedPassage& p) { return p.relevant; }));
  }
  std::size_t distractor_count() const {
    return passages.size() - relevant_count();
  }

  bool operator==(const NoiseMix&) const = default;
};

inline void to_json(json& j, const NoiseMix& m) {
  json ps = json::array();
  for (const auto& p : m.passages)
    ps.push_back(json{{"text", p.text},
                      {"relevant", p.relevant},
                      {"source_index", p.source_index}});
  j = json{{"query_id", m.query_id},
           {"nsr_percent", m.nsr_percent},
           {"seed", m.seed},
           {"passages", std::move(ps)}};
}

inline void from_json(const json& j, NoiseMix& m) {
  detail::require_object(j);
  m.query_id = detail::require_string(j, "query_id");
  m.nsr_percent = static_cast<int>(detail::require_int(j, "nsr_percent"));
  m.seed = detail::require(j, "seed").get<std::uint64_t>();
  m.passages.clear();
  for (const auto& pj : detail::require(j, "passages"))
    m.passages.push_back({detail::require_string(pj, "text"),
                          detail::require_bool(pj, "relevant"),
                          static_cast<std::size_t>(
                              detail::require_int(pj, "source_index"))});
}

// round(nsr / 100 * relevant), halves rounded up.
inline std::size_t required_distractors(int nsr_percent,
                                        std::size_t relevant) {
  if (nsr_percent < 0) throw ValidationError("nsr_percent must be >= 0");
  return (static_cast<std::size_t>(nsr_percent) * relevant + 50) / 100;
}

// Per-record generator: the seed is mixed with the query id so records can
// be processed in any order.
inline std::mt19937_64 record_rng(std::uint64_t seed, std::string_view id) {
  return std::mt19937_64(seed ^ fnv1a64(id));
}

// Adds seeded distractors from `pool` (entries equal to a relevant passage
// are never drawn) and shuffles the mixture.
inline NoiseMix mix_noise(const QueryRecord& record,
                          std::span<const std::string> pool, int nsr_percent,
                          std::uint64_t seed) {
  const std::size_t need =
      required_distractors(nsr_percent, record.relevant_passages.size());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (is_blank(pool[i])) continue;
    if (std::find(record.relevant_passages.begin(),
                  record.relevant_passages.end(),
                  pool[i]) != record.relevant_passages.end())
      continue;
    eligible.push_back(i);
  }
  if (eligible.size() < need)
    throw ValidationError("record '" + record.id +
                          "': insufficient distractor pool: required " +
                          std::to_string(need) + ", available " +
                          std::to_string(eligible.size()));
  auto rng = record_rng(seed, record.id);
  std::shuffle(eligible.begin(), eligible.end(), rng);

  NoiseMix mix;
  mix.query_id = record.id;
  mix.nsr_percent = nsr_percent;
  mix.seed = seed;
  for (std::size_t i = 0; i < record.relevant_passages.size(); ++i)
    mix.passages.push_back({record.relevant_passages[i], true, i});
  for (std::size_t k = 0; k < need; ++k)
    mix.passages.push_back({pool[eligible[k]], false, eligible[k]});
  std::shuffle(mix.passages.begin(), mix.passages.end(), rng);
  return mix;
}

// Faithfulness against the relevant passages only (in their original
// order), so distractors never change the score.
inline double silver_faithfulness(const NoiseMix& mix, std::string_view evidence,
                                  const EntailmentBackend& backend) {
  std::vector<const TaggedPassage*> rel;
  for (const auto& p : mix.passages)
    if (p.relevant) rel.push_back(&p);
  std::sort(rel.begin(), rel.end(),
            [](const TaggedPassage* a, const TaggedPassage* b) {
              return a->source_index < b->source_index;
            });
  std::string premise;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (i) premise.push_back('\n');
    premise += rel[i]->text;
  }
  return score_faithfulness(premise, evidence, backend);
}

inline double drop_percent(double base, double noisy) {
  if (base == 0.0) throw ValidationError("drop_percent: base is zero");
  return 100.0 * (base - noisy) / base;
}

}  // namespace evalign
