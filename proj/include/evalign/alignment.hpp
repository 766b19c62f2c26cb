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

// DPO and lambda-weighted (LPO) preference losses, their gradients, and a
// tabular softmax trainer used to study them at desk scale.
//
// With z the inner argument,
//
//   log-ratio form:     z = beta * ((lw - lw_ref) - (ll - ll_ref))
//   literal-ratio form: z = beta * (exp(lw - lw_ref) - exp(ll - ll_ref))
//
//   dpo = -log Sig(z) = softplus(-z),   lpo = lambda * dpo.
//
// The literal-ratio form puts raw probability ratios inside the sigmoid; it
// is kept so that it can be compared against the usual log-ratio algebra.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "evalign/core_model.hpp"
#include "evalign/errors.hpp"
#include "evalign/preference.hpp"

namespace evalign {

struct PolicyEval {
  double logp_w_theta = 0.0;
  double logp_l_theta = 0.0;
  double logp_w_ref = 0.0;
  double logp_l_ref = 0.0;
};

enum class LossForm { kLogRatio, kLiteralRatio };
enum class LambdaMode { kWeighted, kUnit };

struct LossConfig {
  double beta = 0.1;
  LossForm form = LossForm::kLogRatio;
  LambdaMode lambda_mode = LambdaMode::kWeighted;

  void validate() const {
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  }
};

inline std::string to_string(LossForm f) {
  return f == LossForm::kLogRatio ? "log-ratio" : "literal-ratio";
}

inline std::string to_string(LambdaMode m) {
  return m == LambdaMode::kWeighted ? "paper" : "unit";
}

inline LossForm parse_loss_form(const std::string& s) {
  if (s == "log-ratio") return LossForm::kLogRatio;
  if (s == "literal-ratio") return LossForm::kLiteralRatio;
  throw ConfigError("unknown loss form '" + s + "'");
}

inline LambdaMode parse_lambda_mode(const std::string& s) {
  if (s == "paper") return LambdaMode::kWeighted;
  if (s == "unit") return LambdaMode::kUnit;
  throw ConfigError("unknown lambda mode '" + s + "'");
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// 1 / (1 + exp(-x)), accurate in both tails.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double inner_argument(const PolicyEval& e, const LossConfig& cfg) {
  const double dw = e.logp_w_theta - e.logp_w_ref;
  const double dl = e.logp_l_theta - e.logp_l_ref;
  if (cfg.form == LossForm::kLogRatio) return cfg.beta * (dw - dl);
  return cfg.beta * (std::exp(dw) - std::exp(dl));
}

inline double dpo_loss(const PolicyEval& e, const LossConfig& cfg = {}) {
  return softplus(-inner_argument(e, cfg));
}

inline double effective_lambda(double lambda, const LossConfig& cfg) {
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  return cfg.lambda_mode == LambdaMode::kUnit ? 1.0 : lambda;
}

inline double lpo_loss(const PolicyEval& e, double lambda,
                       const LossConfig& cfg = {}) {
  return effective_lambda(lambda, cfg) * dpo_loss(e, cfg);
}

// Gradient with respect to the two trainable log-probabilities.
struct LossGrad {
  double d_logp_w = 0.0;
  double d_logp_l = 0.0;
};

inline LossGrad lpo_grad(const PolicyEval& e, double lambda,
                         const LossConfig& cfg = {}) {
  const double lam = effective_lambda(lambda, cfg);
  const double z = inner_argument(e, cfg);
  // d softplus(-z) / dz = -Sig(-z)
  const double g = -lam * logistic(-z);
  if (cfg.form == LossForm::kLogRatio)
    return {g * cfg.beta, -g * cfg.beta};
  const double rw = std::exp(e.logp_w_theta - e.logp_w_ref);
  const double rl = std::exp(e.logp_l_theta - e.logp_l_ref);
  return {g * cfg.beta * rw, -g * cfg.beta * rl};
}

// ---------------------------------------------------------------------------
// Tabular toy policy and trainer.

// One context of the toy problem: the candidates referenced by its pairs,
// with their combined scores.
struct ToyContext {
  std::string query_id;
  std::vector<std::int64_t> candidate_ids;  // ascending
  std::vector<double> scores;
  std::vector<std::string> texts;

  // Position of the highest-scored candidate (lowest id on ties).
  std::size_t best() const {
    std::size_t b = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[b]) b = i;
    return b;
  }
};

struct ToyPair {
  std::size_t context = 0;
  std::size_t winner = 0;  // positions within the context
  std::size_t loser = 0;
  double lambda = 1.0;
};

struct ToyDataset {
  std::vector<ToyContext> contexts;
  std::vector<ToyPair> pairs;
};

// Groups pairs by query_id in order of first appearance.
inline ToyDataset make_toy_dataset(std::span<const PreferencePair> pairs) {
  if (pairs.empty()) throw ValidationError("empty pair dataset");
  ToyDataset ds;
  std::map<std::string, std::size_t> ctx_index;
  std::vector<std::map<std::int64_t, std::pair<double, std::string>>> members;
  for (const auto& p : pairs) {
    auto [it, inserted] = ctx_index.emplace(p.query_id, ds.contexts.size());
    if (inserted) {
      ds.contexts.push_back({p.query_id, {}, {}, {}});
      members.emplace_back();
    }
    auto& m = members[it->second];
    auto add = [&](std::int64_t id, double s, const std::string& text) {
      auto [mit, fresh] = m.emplace(id, std::make_pair(s, text));
      if (!fresh && mit->second.first != s)
        throw ValidationError("query '" + p.query_id + "': candidate " +
                              std::to_string(id) +
                              " appears with two different scores");
    };
    add(p.winner_index, p.s_w, p.winner);
    add(p.loser_index, p.s_l, p.loser);
  }
  for (std::size_t c = 0; c < ds.contexts.size(); ++c) {
    auto& ctx = ds.contexts[c];
    for (const auto& [id, st] : members[c]) {
      ctx.candidate_ids.push_back(id);
      ctx.scores.push_back(st.first);
      ctx.texts.push_back(st.second);
    }
    if (ctx.candidate_ids.size() < 2)
      throw ValidationError("query '" + ctx.query_id +
                            "' has fewer than 2 candidates");
  }
  auto position = [&](std::size_t c, std::int64_t id) {
    const auto& ids = ds.contexts[c].candidate_ids;
    return static_cast<std::size_t>(
        std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  for (const auto& p : pairs) {
    const std::size_t c = ctx_index.at(p.query_id);
    if (p.lambda < 0.0) throw ValidationError("lambda must be >= 0");
    ds.pairs.push_back(
        {c, position(c, p.winner_index), position(c, p.loser_index), p.lambda});
  }
  return ds;
}

// pi(y | x) = softmax of the context's logits.
struct ToyPolicy {
  std::vector<std::vector<double>> logits;

  std::vector<double> log_probs(std::size_t context) const {
    const auto& l = logits[context];
    const double m = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - m);
    const double lse = m + std::log(z);
    std::vector<double> out(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) out[i] = l[i] - lse;
    return out;
  }

  std::vector<double> probs(std::size_t context) const {
    auto lp = log_probs(context);
    for (double& v : lp) v = std::exp(v);
    return lp;
  }

  // Candidate positions best first; ties go to the lower position.
  std::vector<std::size_t> ranking(std::size_t context) const {
    const auto& l = logits[context];
    std::vector<std::size_t> order(l.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return l[a] > l[b]; });
    return order;
  }

  bool operator==(const ToyPolicy&) const = default;
};

struct TrainOptions {
  int epochs = 200;
  double learning_rate = 0.5;
  LossConfig loss;
  std::uint64_t seed = 7;
  // Standard deviation of the seeded initial logits; 0 gives uniform
  // policies. The reference policy is always the initial policy.
  double init_scale = 0.0;
};

struct TrainReport {
  int epochs = 0;
  double learning_rate = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string form;
  std::string lambda_mode;
  std::size_t contexts = 0;
  std::size_t pairs = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // epochs + 1 entries
  double mrr = 0.0;
  double top1 = 0.0;
};

inline json to_json_value(const TrainReport& r) {
  return json{{"epochs", r.epochs},
              {"learning_rate", r.learning_rate},
              {"beta", r.beta},
              {"seed", r.seed},
              {"form", r.form},
              {"lambda_mode", r.lambda_mode},
              {"contexts", r.contexts},
              {"pairs", r.pairs},
              {"initial_loss", r.initial_loss},
              {"final_loss", r.final_loss},
              {"loss_history", r.loss_history},
              {"mrr", r.mrr},
              {"top1", r.top1}};
}

struct TrainResult {
  ToyPolicy policy;
  ToyPolicy reference;
  TrainReport report;
};

inline ToyPolicy initial_policy(const ToyDataset& ds, const TrainOptions& opt) {
  ToyPolicy p;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& ctx : ds.contexts) {
    std::vector<double> l(ctx.candidate_ids.size(), 0.0);
    if (opt.init_scale > 0.0)
      for (double& v : l) v = opt.init_scale * noise(rng);
    p.logits.push_back(std::move(l));
  }
  return p;
}

// Mean lambda-weighted loss over all pairs; fills `grad` (same shape as the
// logits) when given.
inline double toy_objective(const ToyDataset& ds, const ToyPolicy& policy,
                            const ToyPolicy& reference, const LossConfig& cfg,
                            std::vector<std::vector<double>>* grad) {
  std::vector<std::vector<double>> lp, lp_ref, pr;
  lp.reserve(ds.contexts.size());
  for (std::size_t c = 0; c < ds.contexts.size(); ++c) {
    lp.push_back(policy.log_probs(c));
    lp_ref.push_back(reference.log_probs(c));
    if (grad) pr.push_back(policy.probs(c));
  }
  if (grad) {
    grad->assign(ds.contexts.size(), {});
    for (std::size_t c = 0; c < ds.contexts.size(); ++c)
      (*grad)[c].assign(policy.logits[c].size(), 0.0);
  }
  const double scale = 1.0 / static_cast<double>(ds.pairs.size());
  double total = 0.0;
  for (const auto& p : ds.pairs) {
    const PolicyEval e{lp[p.context][p.winner], lp[p.context][p.loser],
                       lp_ref[p.context][p.winner], lp_ref[p.context][p.loser]};
    total += lpo_loss(e, p.lambda, cfg);
    if (!grad) continue;
    const LossGrad g = lpo_grad(e, p.lambda, cfg);
    // d log pi(y) / d logit_k = [k == y] - pi_k
    auto& gc = (*grad)[p.context];
    const auto& prob = pr[p.context];
    for (std::size_t k = 0; k < gc.size(); ++k) {
      const double dw = (k == p.winner ? 1.0 : 0.0) - prob[k];
      const double dl = (k == p.loser ? 1.0 : 0.0) - prob[k];
      gc[k] += scale * (g.d_logp_w * dw + g.d_logp_l * dl);
    }
  }
  return total * scale;
}

// MRR of the highest-scored candidate under the policy's ranking, and the
// fraction of contexts where that candidate is the policy's argmax.
inline std::pair<double, double> ranking_quality(const ToyDataset& ds,
                                                 const ToyPolicy& policy) {
  double mrr = 0.0, top1 = 0.0;
  for (std::size_t c = 0; c < ds.contexts.size(); ++c) {
    const std::size_t best = ds.contexts[c].best();
    const auto order = policy.ranking(c);
    const auto pos = std::find(order.begin(), order.end(), best) - order.begin();
    mrr += 1.0 / static_cast<double>(pos + 1);
    top1 += pos == 0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ds.contexts.size());
  return {mrr / n, top1 / n};
}

// Full-batch gradient descent on the mean loss.
inline TrainResult train_toy(const ToyDataset& ds, const TrainOptions& opt) {
  opt.loss.validate();
  if (ds.pairs.empty()) throw ValidationError("empty pair dataset");
  if (opt.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(opt.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  TrainResult res;
  res.reference = initial_policy(ds, opt);
  res.policy = res.reference;
  auto& rep = res.report;
  rep.epochs = opt.epochs;
  rep.learning_rate = opt.learning_rate;
  rep.beta = opt.loss.beta;
  rep.seed = opt.seed;
  rep.form = to_string(opt.loss.form);
  rep.lambda_mode = to_string(opt.loss.lambda_mode);
  rep.contexts = ds.contexts.size();
  rep.pairs = ds.pairs.size();

  std::vector<std::vector<double>> grad;
  for (int epoch = 0; epoch <= opt.epochs; ++epoch) {
    const bool step = epoch < opt.epochs;
    const double loss = toy_objective(ds, res.policy, res.reference, opt.loss,
                                      step ? &grad : nullptr);
    if (!std::isfinite(loss))
      throw DivergenceError(epoch, "non-finite loss at epoch " +
                                       std::to_string(epoch));
    rep.loss_history.push_back(loss);
    if (!step) break;
    for (std::size_t c = 0; c < grad.size(); ++c)
      for (std::size_t k = 0; k < grad[c].size(); ++k)
        res.policy.logits[c][k] -= opt.learning_rate * grad[c][k];
  }
  rep.initial_loss = rep.loss_history.front();
  rep.final_loss = rep.loss_history.back();
  std::tie(rep.mrr, rep.top1) = ranking_quality(ds, res.policy);
  return res;
}

inline TrainResult train_toy(std::span<const PreferencePair> pairs,
                             const TrainOptions& opt) {
  return train_toy(make_toy_dataset(pairs), opt);
}

// The policy's preferred candidate for each context.
struct PolicySelection {
  std::string query_id;
  std::vector<std::int64_t> candidate_ids;
  std::vector<double> logits;
  std::int64_t selected_index = 0;
  std::string selected_evidence;
};

inline void to_json(json& j, const PolicySelection& s) {
  j = json{{"query_id", s.query_id},
           {"candidate_ids", s.candidate_ids},
           {"logits", s.logits},
           {"selected_index", s.selected_index},
           {"selected_evidence", s.selected_evidence}};
}

inline void from_json(const json& j, PolicySelection& s) {
  detail::require_object(j);
  s.query_id = detail::require_string(j, "query_id");
  s.candidate_ids = detail::require(j, "candidate_ids").get<std::vector<std::int64_t>>();
  s.logits = detail::require(j, "logits").get<std::vector<double>>();
  s.selected_index = detail::require_int(j, "selected_index");
  s.selected_evidence = detail::require_string(j, "selected_evidence");
}

inline std::vector<PolicySelection> selections(const ToyDataset& ds,
                                               const ToyPolicy& policy) {
  std::vector<PolicySelection> out;
  for (std::size_t c = 0; c < ds.contexts.size(); ++c) {
    const auto& ctx = ds.contexts[c];
    const std::size_t top = policy.ranking(c).front();
    out.push_back({ctx.query_id, ctx.candidate_ids, policy.logits[c],
                   ctx.candidate_ids[top], ctx.texts[top]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reward export for an external PPO trainer (no training happens here).

struct RewardRecord {
  std::string query_id;
  std::string context;
  std::int64_t candidate_index = 0;
  std::string evidence;
  double reward = 0.0;

  bool operator==(const RewardRecord&) const = default;
};

inline void to_json(json& j, const RewardRecord& r) {
  j = json{{"query_id", r.query_id},
           {"context", r.context},
           {"candidate_index", r.candidate_index},
           {"evidence", r.evidence},
           {"reward", r.reward}};
}

inline void from_json(const json& j, RewardRecord& r) {
  r.query_id = detail::require_string(j, "query_id");
  r.context = detail::require_string(j, "context");
  r.candidate_index = detail::require_int(j, "candidate_index");
  r.evidence = detail::require_string(j, "evidence");
  r.reward = detail::require_number(j, "reward");
}

// Rewards are the combined scores, emitted in rank order.
inline std::vector<RewardRecord> export_ppo_rewards(const RankedGroup& group) {
  std::vector<const RankedCandidate*> by_rank;
  for (const auto& c : group.candidates) by_rank.push_back(&c);
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [](const RankedCandidate* a, const RankedCandidate* b) {
                     return a->rank < b->rank;
                   });
  std::vector<RewardRecord> out;
  for (const auto* c : by_rank)
    out.push_back({group.query_id, group.context, c->candidate_index,
                   c->evidence, c->s});
  return out;
}

}  // namespace evalign
