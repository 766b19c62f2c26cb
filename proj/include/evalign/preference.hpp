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

// Ranking of weighted candidates and construction of lambda-weighted
// preference pairs.
//
// For a pair (w, l) with combined scores s_w > s_l and ranks r_w < r_l the
// MRR lambda weight is
//
//   lambda = s_w * (1/r_w - 1/r_l) + s_l * (1/r_l - 1/r_w)
//          = (s_w - s_l) * (1/r_w - 1/r_l)  > 0,
//
// i.e. the reciprocal-rank gain of swapping the two, scaled by their score
// gap. Pairs near the top of the list get the largest weights.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "evalign/core_model.hpp"
#include "evalign/errors.hpp"
#include "evalign/weighting.hpp"

namespace evalign {

struct Ranking {
  std::string query_id;
  // Positions into the scored list, best first.
  std::vector<std::size_t> order;
  // rank[i] is the 1-based rank of scored[i].
  std::vector<int> rank;
};

// Stable descending sort by combined score; ties go to the lower
// candidate_index.
inline Ranking rank_candidates(std::span<const ScoredCandidate> scored,
                               std::string query_id = {}) {
  if (scored.empty()) throw ValidationError("cannot rank an empty group");
  Ranking r;
  r.query_id = std::move(query_id);
  r.order.resize(scored.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scored[a].s != scored[b].s)
                       return scored[a].s > scored[b].s;
                     return scored[a].candidate_index <
                            scored[b].candidate_index;
                   });
  r.rank.assign(scored.size(), 0);
  for (std::size_t pos = 0; pos < r.order.size(); ++pos)
    r.rank[r.order[pos]] = static_cast<int>(pos + 1);
  return r;
}

inline double delta_mrr(int r_w, int r_l) {
  if (r_w < 1 || r_l < 1) throw ValidationError("ranks must be >= 1");
  return 1.0 / r_w - 1.0 / r_l;
}

inline double lambda_weight(double s_w, double s_l, int r_w, int r_l) {
  if (!(s_w > s_l))
    throw ValidationError("lambda_weight requires s_w > s_l");
  if (!(r_w < r_l))
    throw ValidationError("lambda_weight requires r_w < r_l");
  return s_w * delta_mrr(r_w, r_l) + s_l * delta_mrr(r_l, r_w);
}

struct PreferencePair {
  std::string query_id;
  std::string context;
  std::string winner;
  std::string loser;
  std::int64_t winner_index = 0;
  std::int64_t loser_index = 0;
  double s_w = 0.0;
  double s_l = 0.0;
  int r_w = 1;
  int r_l = 2;
  double delta_mrr = 0.0;
  double lambda = 0.0;

  bool operator==(const PreferencePair&) const = default;
};

inline void to_json(json& j, const PreferencePair& p) {
  j = json{{"query_id", p.query_id},
           {"context", p.context},
           {"winner", p.winner},
           {"loser", p.loser},
           {"winner_index", p.winner_index},
           {"loser_index", p.loser_index},
           {"s_w", p.s_w},
           {"s_l", p.s_l},
           {"r_w", p.r_w},
           {"r_l", p.r_l},
           {"delta_mrr", p.delta_mrr},
           {"lambda", p.lambda}};
}

inline void from_json(const json& j, PreferencePair& p) {
  detail::require_object(j);
  p.query_id = detail::require_string(j, "query_id");
  p.context = detail::require_string(j, "context");
  p.winner = detail::require_string(j, "winner");
  p.loser = detail::require_string(j, "loser");
  p.winner_index = detail::require_int(j, "winner_index");
  p.loser_index = detail::require_int(j, "loser_index");
  p.s_w = detail::require_number(j, "s_w");
  p.s_l = detail::require_number(j, "s_l");
  p.r_w = static_cast<int>(detail::require_int(j, "r_w"));
  p.r_l = static_cast<int>(detail::require_int(j, "r_l"));
  p.delta_mrr = detail::require_number(j, "delta_mrr");
  p.lambda = detail::require_number(j, "lambda");
  if (p.lambda < 0.0) throw ValidationError("lambda must be >= 0");
  if (p.winner_index == p.loser_index)
    throw ValidationError("winner and loser are the same candidate");
}

struct PairOptions {
  // Ablation: write lambda = 1 for every pair.
  bool no_lambda = false;
};

// One pair per unordered candidate pair with strictly different scores,
// ordered by (r_w, r_l). `texts[i]` is the evidence of scored[i].
inline std::vector<PreferencePair> build_pairs(
    const Ranking& ranking, std::span<const ScoredCandidate> scored,
    std::span<const std::string> texts, const std::string& context,
    const PairOptions& opts = {}) {
  if (ranking.rank.size() != scored.size() || texts.size() != scored.size())
    throw ValidationError("ranking, scores and texts disagree in size");
  std::vector<PreferencePair> pairs;
  const auto& order = ranking.order;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto& w = scored[order[a]];
      const auto& l = scored[order[b]];
      if (!(w.s > l.s)) continue;
      PreferencePair p;
      p.query_id = ranking.query_id;
      p.context = context;
      p.winner = texts[order[a]];
      p.loser = texts[order[b]];
      p.winner_index = w.candidate_index;
      p.loser_index = l.candidate_index;
      p.s_w = w.s;
      p.s_l = l.s;
      p.r_w = ranking.rank[order[a]];
      p.r_l = ranking.rank[order[b]];
      p.delta_mrr = delta_mrr(p.r_w, p.r_l);
      p.lambda = opts.no_lambda ? 1.0 : lambda_weight(p.s_w, p.s_l, p.r_w, p.r_l);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Weight-stage output: one line per query with weights, stats and ranks.

struct RankedCandidate {
  std::int64_t candidate_index = 0;
  std::string evidence;
  OracleScores oracle;
  double s = 0.0;
  int rank = 1;

  bool operator==(const RankedCandidate&) const = default;
};

struct RankedGroup {
  std::string query_id;
  std::string context;
  CovWeights weights;
  GroupStats stats;
  std::string weight_mode = "cov";  // "cov" | "uniform"
  std::string cov_population = "query";  // "query" | "dataset"
  // Candidates in assess order (not rank order).
  std::vector<RankedCandidate> candidates;

  std::vector<ScoredCandidate> scored() const {
    std::vector<ScoredCandidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates)
      out.push_back({c.candidate_index, c.oracle, c.s});
    return out;
  }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(c.evidence);
    return out;
  }
};

inline json stats_json(const CovStats& s) {
  return json{{"mu", s.mu}, {"sigma", s.sigma}, {"cov", s.cov}};
}

inline CovStats stats_from_json(const json& j) {
  return {detail::require_number(j, "mu"), detail::require_number(j, "sigma"),
          detail::require_number(j, "cov")};
}

inline void to_json(json& j, const RankedGroup& g) {
  j = json::object();
  j["query_id"] = g.query_id;
  j["context"] = g.context;
  j["weights"] = json{{"alpha_f", g.weights.alpha_f},
                      {"alpha_h", g.weights.alpha_h},
                      {"alpha_c", g.weights.alpha_c},
                      {"tau", g.weights.tau},
                      {"mode", g.weight_mode},
                      {"population", g.cov_population}};
  j["stats"] = json{{"f", stats_json(g.stats.f)},
                    {"h", stats_json(g.stats.h)},
                    {"c", stats_json(g.stats.c)}};
  json cands = json::array();
  for (const auto& c : g.candidates) {
    json cj = c.oracle;
    cj["candidate_index"] = c.candidate_index;
    cj["evidence"] = c.evidence;
    cj["s"] = c.s;
    cj["rank"] = c.rank;
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
}

inline void from_json(const json& j, RankedGroup& g) {
  detail::require_object(j);
  g.query_id = detail::require_string(j, "query_id");
  g.context = detail::require_string(j, "context");
  const json& w = detail::require(j, "weights");
  g.weights = {detail::require_number(w, "alpha_f"),
               detail::require_number(w, "alpha_h"),
               detail::require_number(w, "alpha_c"),
               detail::require_number(w, "tau")};
  g.weight_mode = detail::require_string(w, "mode");
  g.cov_population = detail::require_string(w, "population");
  const json& st = detail::require(j, "stats");
  g.stats = {stats_from_json(detail::require(st, "f")),
             stats_from_json(detail::require(st, "h")),
             stats_from_json(detail::require(st, "c"))};
  g.candidates.clear();
  for (const auto& cj : detail::require(j, "candidates")) {
    RankedCandidate c;
    c.candidate_index = detail::require_int(cj, "candidate_index");
    c.evidence = detail::require_string(cj, "evidence");
    c.oracle = cj.get<OracleScores>();
    c.s = detail::require_number(cj, "s");
    c.rank = static_cast<int>(detail::require_int(cj, "rank"));
    g.candidates.push_back(std::move(c));
  }
}

// Ranks a weighted group and packages it for the weight-stage output.
inline RankedGroup make_ranked_group(const ScoredGroup& group,
                                     const WeightedGroup& weighted,
                                     WeightMode mode, bool dataset_level) {
  RankedGroup g;
  g.query_id = group.query_id;
  g.context = group.context;
  g.weights = weighted.weights;
  g.stats = weighted.stats;
  g.weight_mode = mode == WeightMode::kUniform ? "uniform" : "cov";
  g.cov_population = dataset_level ? "dataset" : "query";
  std::vector<ScoredCandidate> scored = weighted.scored;
  for (std::size_t i = 0; i < scored.size(); ++i)
    scored[i].candidate_index = group.candidates[i].candidate_index;
  const Ranking ranking = rank_candidates(scored, group.query_id);
  for (std::size_t i = 0; i < scored.size(); ++i)
    g.candidates.push_back({scored[i].candidate_index,
                            group.candidates[i].evidence, scored[i].oracle,
                            scored[i].s, ranking.rank[i]});
  return g;
}

inline std::vector<PreferencePair> pairs_for_group(const RankedGroup& g,
                                                   const PairOptions& opts) {
  const auto scored = g.scored();
  const auto texts = g.texts();
  const Ranking ranking = rank_candidates(scored, g.query_id);
  return build_pairs(ranking, scored, texts, g.context, opts);
}

}  // namespace evalign
