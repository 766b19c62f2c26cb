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

// File-to-file stage drivers shared by the CLI subcommands and the pipeline.
// Each driver reads line-delimited inputs, runs one module, and writes its
// outputs in input order.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "evalign/alignment.hpp"
#include "evalign/core_model.hpp"
#include "evalign/dedup.hpp"
#include "evalign/eval.hpp"
#include "evalign/experts.hpp"
#include "evalign/parallel.hpp"
#include "evalign/preference.hpp"
#include "evalign/weighting.hpp"

namespace evalign {

namespace fs = std::filesystem;

using WarningSink = std::function<void(const std::string&)>;

inline constexpr std::size_t kExpectedSampleSize = 10;

inline void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Samples -> deduplicated candidate sets. With `bypass` the samples are
// passed through unchanged (deduped = false).
inline std::size_t dedup_stage(const fs::path& in, const fs::path& out,
                               const DedupConfig& cfg, bool bypass = false,
                               const WarningSink& warn = {}) {
  cfg.validate();
  const auto samples = load_jsonl<CandidateSet>(in);
  std::vector<CandidateSet> sets;
  sets.reserve(samples.size());
  std::size_t kept = 0;
  for (const auto& s : samples) {
    if (warn && s.candidates.size() != kExpectedSampleSize)
      warn("query '" + s.query_id + "': " +
           std::to_string(s.candidates.size()) + " samples (expected " +
           std::to_string(kExpectedSampleSize) + ")");
    try {
      if (bypass) {
        if (s.candidates.empty()) throw ValidationError("no samples");
        CandidateSet c = s;
        c.deduped = false;
        sets.push_back(std::move(c));
      } else {
        sets.push_back(dedup(s, cfg));
      }
    } catch (const Error& e) {
      throw RecordError(s.query_id, e.what());
    }
    kept += sets.back().candidates.size();
  }
  save_jsonl(sets, out);
  return kept;
}

// Records + candidate sets -> per-query oracle scores.
inline std::size_t assess_stage(const fs::path& records_path,
                                const fs::path& candidates_path,
                                const fs::path& out,
                                const ExpertsConfig& experts,
                                unsigned workers = 1) {
  const auto records = load_records(records_path);
  const auto sets = load_jsonl<CandidateSet>(candidates_path);
  std::unordered_map<std::string, const QueryRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;

  std::vector<QuadQARE> quads;
  std::vector<std::size_t> group_of;
  for (std::size_t g = 0; g < sets.size(); ++g) {
    auto it = by_id.find(sets[g].query_id);
    if (it == by_id.end())
      throw RecordError(sets[g].query_id, "no query record for candidates");
    if (sets[g].candidates.empty())
      throw RecordError(sets[g].query_id, "empty candidate set");
    for (auto& q : make_quads(*it->second, sets[g])) {
      quads.push_back(std::move(q));
      group_of.push_back(g);
    }
  }

  const ExpertPanel panel(experts);
  const auto backends = panel.backends();
  const auto scores = parallel_map(
      std::span<const QuadQARE>(quads),
      [&](const QuadQARE& q) { return assess(q, backends); }, workers);

  std::vector<ScoredGroup> groups(sets.size());
  for (std::size_t g = 0; g < sets.size(); ++g) {
    groups[g].query_id = sets[g].query_id;
    groups[g].context = make_context(*by_id.at(sets[g].query_id));
    groups[g].extra["backends"] = panel.names();
  }
  for (std::size_t i = 0; i < quads.size(); ++i)
    groups[group_of[i]].candidates.push_back(
        {quads[i].candidate_index, quads[i].evidence, scores[i]});
  save_jsonl(groups, out);
  return quads.size();
}

struct WeightOptions {
  double tau = 1.0;
  bool uniform_weights = false;
  // Pool CoV statistics over every candidate in the file instead of per
  // query.
  bool dataset_level_cov = false;
};

inline std::vector<RankedGroup> weight_groups(
    std::span<const ScoredGroup> groups, const WeightOptions& opt) {
  if (!(opt.tau > 0.0)) throw ConfigError("tau must be > 0");
  const WeightMode mode =
      opt.uniform_weights ? WeightMode::kUniform : WeightMode::kCov;
  std::vector<RankedGroup> out;
  out.reserve(groups.size());

  std::optional<WeightedGroup> pooled;
  if (opt.dataset_level_cov) {
    std::vector<OracleScores> all;
    for (const auto& g : groups)
      for (const auto& c : g.candidates) all.push_back(c.oracle);
    if (!all.empty()) pooled = weight_group(all, opt.tau, mode);
  }

  for (const auto& g : groups) {
    try {
      std::vector<OracleScores> scores;
      for (const auto& c : g.candidates) scores.push_back(c.oracle);
      WeightedGroup wg;
      if (pooled) {
        wg.weights = pooled->weights;
        wg.stats = pooled->stats;
        if (mode == WeightMode::kUniform) {
          wg.scored = weight_group(scores, opt.tau, mode).scored;
        } else {
          wg.scored = apply_weights(scores, wg.weights);
        }
      } else {
        wg = weight_group(scores, opt.tau, mode);
      }
      out.push_back(make_ranked_group(g, wg, mode, opt.dataset_level_cov));
    } catch (const Error& e) {
      throw RecordError(g.query_id, e.what());
    }
  }
  return out;
}

inline std::size_t weight_stage(const fs::path& in, const fs::path& out,
                                const WeightOptions& opt) {
  const auto groups = load_jsonl<ScoredGroup>(in);
  const auto ranked = weight_groups(groups, opt);
  save_jsonl(ranked, out);
  return ranked.size();
}

inline std::vector<PreferencePair> pairs_from_ranked(
    std::span<const RankedGroup> groups, const PairOptions& opt) {
  std::vector<PreferencePair> pairs;
  for (const auto& g : groups) {
    try {
      for (auto& p : pairs_for_group(g, opt)) pairs.push_back(std::move(p));
    } catch (const Error& e) {
      throw RecordError(g.query_id, e.what());
    }
  }
  return pairs;
}

inline std::size_t pairs_stage(const fs::path& in, const fs::path& out,
                               const PairOptions& opt) {
  const auto groups = load_jsonl<RankedGroup>(in);
  const auto pairs = pairs_from_ranked(groups, opt);
  save_jsonl(pairs, out);
  return pairs.size();
}

// Trains the toy policy; writes the report and, optionally, each context's
// selected candidate.
inline TrainReport train_stage(const fs::path& pairs_path,
                               const fs::path& report_path,
                               const std::optional<fs::path>& policy_path,
                               const TrainOptions& opt) {
  const auto pairs = load_jsonl<PreferencePair>(pairs_path);
  const auto ds = make_toy_dataset(pairs);
  const auto result = train_toy(ds, opt);
  write_json_file(report_path, to_json_value(result.report));
  if (policy_path) save_jsonl(selections(ds, result.policy), *policy_path);
  return result.report;
}

struct EvalOptions {
  std::string counter = "whitespace";
  std::optional<std::size_t> max_answer_tokens;
};

inline EvalSummary eval_stage(const fs::path& responses_path,
                              const fs::path& records_path,
                              const fs::path& out,
                              const std::optional<fs::path>& evidence_path,
                              const EvalOptions& opt) {
  auto records = load_records(records_path);
  if (opt.max_answer_tokens)
    records = filter_long_answers(records, *opt.max_answer_tokens);
  const auto responses = load_responses(responses_path);
  std::unordered_map<std::string, std::string> evidence;
  if (evidence_path)
    for (const auto& s : load_jsonl<PolicySelection>(*evidence_path))
      evidence[s.query_id] = s.selected_evidence;
  const auto results = evaluate(records, responses, opt.counter, evidence);
  save_jsonl(results, out);
  return summarize(results);
}

struct PoolEntry {
  std::string text;
};

inline void from_json(const json& j, PoolEntry& p) {
  if (j.is_string()) {
    p.text = j.get<std::string>();
    return;
  }
  detail::require_object(j);
  p.text = detail::require_string(j, "text");
}

// Without a pool file each record draws from its own distractor_passages.
inline std::size_t perturb_stage(const fs::path& records_path,
                                 const std::optional<fs::path>& pool_path,
                                 int nsr_percent, std::uint64_t seed,
                                 const fs::path& out) {
  const auto records = load_records(records_path);
  std::vector<std::string> shared_pool;
  if (pool_path)
    for (const auto& e : load_jsonl<PoolEntry>(*pool_path))
      shared_pool.push_back(e.text);
  std::vector<NoiseMix> mixes;
  for (const auto& r : records) {
    const std::vector<std::string> own =
        r.distractor_passages.value_or(std::vector<std::string>{});
    const auto& pool = pool_path ? shared_pool : own;
    mixes.push_back(mix_noise(r, pool, nsr_percent, seed));
  }
  save_jsonl(mixes, out);
  return mixes.size();
}

inline std::size_t export_ppo_stage(const fs::path& in, const fs::path& out) {
  const auto groups = load_jsonl<RankedGroup>(in);
  std::vector<RewardRecord> rewards;
  for (const auto& g : groups)
    for (auto& r : export_ppo_rewards(g)) rewards.push_back(std::move(r));
  save_jsonl(rewards, out);
  return rewards.size();
}

}  // namespace evalign
