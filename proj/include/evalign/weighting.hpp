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

// Smoothing coefficient-of-variation weighting.
//
// Each expert's scores over a population get a CoV c = sigma / (|mu| + eps);
// the three CoVs go through a temperature softmax to give convex weights,
// and a candidate's combined score is the weighted sum of its three scores.
// Experts whose scores vary more relative to their mean weigh more.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "evalign/errors.hpp"
#include "evalign/experts.hpp"

namespace evalign {

inline constexpr double kCovEpsilon = 1e-8;

struct CovStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  double cov = 0.0;
};

struct CovWeights {
  double alpha_f = 1.0 / 3.0;
  double alpha_h = 1.0 / 3.0;
  double alpha_c = 1.0 / 3.0;
  double tau = 1.0;
};

struct ScoredCandidate {
  std::int64_t candidate_index = 0;
  OracleScores oracle;
  double s = 0.0;
};

// Population mean and standard deviation, two-pass.
inline CovStats cov(std::span<const double> values,
                    double epsilon = kCovEpsilon) {
  if (values.empty()) throw ValidationError("cov of an empty list");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mu = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  CovStats st;
  st.mu = mu;
  st.sigma = std::sqrt(ss / n);
  st.cov = st.sigma / (std::abs(mu) + epsilon);
  return st;
}

// Temperature softmax over the three CoVs, max-subtracted.
inline CovWeights smooth_weights(double c_f, double c_h, double c_c,
                                 double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  const double m = std::max({c_f, c_h, c_c});
  const double e_f = std::exp((c_f - m) / tau);
  const double e_h = std::exp((c_h - m) / tau);
  const double e_c = std::exp((c_c - m) / tau);
  const double z = e_f + e_h + e_c;
  return {e_f / z, e_h / z, e_c / z, tau};
}

inline double combine(const OracleScores& s, const CovWeights& w) {
  return w.alpha_f * s.s_f + w.alpha_h * s.s_h + w.alpha_c * s.s_c;
}

enum class WeightMode {
  kCov,      // smoothing CoV weights
  kUniform,  // ablation: every alpha is 1/3
};

struct GroupStats {
  CovStats f, h, c;
};

inline GroupStats group_stats(std::span<const OracleScores> scores) {
  std::vector<double> f, h, c;
  f.reserve(scores.size());
  h.reserve(scores.size());
  c.reserve(scores.size());
  for (const auto& s : scores) {
    f.push_back(s.s_f);
    h.push_back(s.s_h);
    c.push_back(s.s_c);
  }
  return {cov(f), cov(h), cov(c)};
}

struct WeightedGroup {
  CovWeights weights;
  GroupStats stats;
  std::vector<ScoredCandidate> scored;
};

// Applies already-chosen weights to a group.
inline std::vector<ScoredCandidate> apply_weights(
    std::span<const OracleScores> scores, const CovWeights& w) {
  std::vector<ScoredCandidate> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.push_back({static_cast<std::int64_t>(i), scores[i],
                   combine(scores[i], w)});
  return out;
}

// CoVs are taken over this group. In uniform mode the weights are fixed at
// 1/3 and the combined score is the plain mean of the three scores.
inline WeightedGroup weight_group(std::span<const OracleScores> scores,
                                  double tau,
                                  WeightMode mode = WeightMode::kCov) {
  if (scores.empty()) throw ValidationError("weight_group of an empty group");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  WeightedGroup g;
  g.stats = group_stats(scores);
  if (mode == WeightMode::kUniform) {
    g.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, tau};
    g.scored.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& s = scores[i];
      g.scored.push_back(
          {static_cast<std::int64_t>(i), s, (s.s_f + s.s_h + s.s_c) / 3.0});
    }
    return g;
  }
  g.weights = smooth_weights(g.stats.f.cov, g.stats.h.cov, g.stats.c.cov, tau);
  g.scored = apply_weights(scores, g.weights);
  return g;
}

}  // namespace evalign
