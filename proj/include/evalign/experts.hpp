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

// Three experts score each piece of extracted evidence:
//
//   faithfulness  entailment of the evidence by the retrieved passages
//   helpfulness   Sig(log p(a | q, e) - log p(a | q))
//   conciseness   cosine(embed(full answer), embed(evidence))
//
// Each expert talks to an abstract backend. The built-in proxies are
// deterministic lexical stand-ins; `RemoteScorer` forwards to a service
// hosting real models.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "evalign/core_model.hpp"
#include "evalign/errors.hpp"
#include "evalign/remote_scorer.hpp"
#include "evalign/text.hpp"

namespace evalign {

struct OracleScores {
  double s_f = 0.0;  // faithfulness, [0, 1]
  double s_h = 0.5;  // helpfulness, [0, 1]
  double s_c = 0.0;  // conciseness, [-1, 1]

  bool operator==(const OracleScores&) const = default;
};

inline void validate(const OracleScores& s) {
  if (!std::isfinite(s.s_f) || !std::isfinite(s.s_h) || !std::isfinite(s.s_c))
    throw ValidationError("oracle scores must be finite");
  if (s.s_f < 0.0 || s.s_f > 1.0 || s.s_h < 0.0 || s.s_h > 1.0 ||
      s.s_c < -1.0 || s.s_c > 1.0)
    throw ValidationError("oracle scores out of range");
}

class EntailmentBackend {
 public:
  virtual ~EntailmentBackend() = default;
  virtual std::string name() const = 0;
  virtual double entailment(std::string_view premise,
                            std::string_view hypothesis) const = 0;
};

class AnswerLogProbBackend {
 public:
  virtual ~AnswerLogProbBackend() = default;
  virtual std::string name() const = 0;
  // log p(answer | query [+ evidence]); the backend owns tokenization.
  virtual double answer_log_prob(
      std::string_view query, std::string_view answer,
      std::optional<std::string_view> evidence) const = 0;
  // (log p with evidence, log p without). Backends may override this to
  // score both conditions over a shared support.
  virtual std::pair<double, double> answer_log_prob_pair(
      std::string_view query, std::string_view answer,
      std::string_view evidence) const {
    return {answer_log_prob(query, answer, evidence),
            answer_log_prob(query, answer, std::nullopt)};
  }
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string name() const = 0;
  virtual double cosine(std::string_view a, std::string_view b) const = 0;
};

// Fraction of the hypothesis' tokens (as a multiset) found in the premise.
class ContainmentEntailment final : public EntailmentBackend {
 public:
  std::string name() const override { return "proxy-containment"; }

  double entailment(std::string_view premise,
                    std::string_view hypothesis) const override {
    auto hyp = normalize(hypothesis);
    if (hyp.empty()) return 0.0;
    auto prem = normalize(premise);
    auto overlap = multiset_overlap(count_tokens(hyp), count_tokens(prem));
    return static_cast<double>(overlap) / static_cast<double>(hyp.size());
  }
};

// Additive-smoothed unigram language model estimated from the context
// (query, plus evidence when given); returns the summed log-probability of
// the answer tokens. The vocabulary is context tokens plus answer tokens.
class SmoothedUnigramLogProb final : public AnswerLogProbBackend {
 public:
  explicit SmoothedUnigramLogProb(double alpha = 1.0) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw ConfigError("smoothing alpha must be > 0");
  }

  std::string name() const override { return "proxy-unigram-lm"; }

  double answer_log_prob(
      std::string_view query, std::string_view answer,
      std::optional<std::string_view> evidence) const override {
    std::string context(query);
    if (evidence) {
      context.push_back('\n');
      context.append(*evidence);
    }
    const auto ctx_tokens = normalize(context);
    const auto ans_tokens = normalize(answer);
    std::unordered_set<std::string> vocab(ctx_tokens.begin(), ctx_tokens.end());
    vocab.insert(ans_tokens.begin(), ans_tokens.end());
    return log_prob(ctx_tokens, ans_tokens, vocab.size());
  }

  // Both conditions share the vocabulary query + evidence + answer, so
  // the with/without probabilities are directly comparable.
  std::pair<double, double> answer_log_prob_pair(
      std::string_view query, std::string_view answer,
      std::string_view evidence) const override {
    const auto q_tokens = normalize(query);
    const auto e_tokens = normalize(evidence);
    const auto ans_tokens = normalize(answer);
    std::unordered_set<std::string> vocab(q_tokens.begin(), q_tokens.end());
    vocab.insert(e_tokens.begin(), e_tokens.end());
    vocab.insert(ans_tokens.begin(), ans_tokens.end());
    auto with = q_tokens;
    with.insert(with.end(), e_tokens.begin(), e_tokens.end());
    return {log_prob(with, ans_tokens, vocab.size()),
            log_prob(q_tokens, ans_tokens, vocab.size())};
  }

 private:
  double log_prob(const std::vector<std::string>& ctx,
                  const std::vector<std::string>& ans,
                  std::size_t vocab_size) const {
    const auto counts = count_tokens(ctx);
    const double denom = static_cast<double>(ctx.size()) +
                         alpha_ * static_cast<double>(vocab_size);
    double logp = 0.0;
    for (const auto& tok : ans) {
      auto it = counts.find(tok);
      const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      logp += std::log((c + alpha_) / denom);
    }
    return logp;
  }

  double alpha_;
};

// L2-normalized hashed term-frequency vectors (FNV-1a of the normalized
// token, modulo the dimension). Distinct tokens that collide share a slot.
class HashedTfEmbedding final : public EmbeddingBackend {
 public:
  static constexpr std::uint64_t kDefaultDimension = 1u << 16;

  explicit HashedTfEmbedding(std::uint64_t dimension = kDefaultDimension)
      : dimension_(dimension) {
    if (dimension == 0) throw ConfigError("embedding dimension must be > 0");
  }

  std::string name() const override { return "proxy-hashed-tf"; }

  std::uint64_t slot(std::string_view token) const {
    return fnv1a64(token) % dimension_;
  }

  double cosine(std::string_view a, std::string_view b) const override {
    auto va = embed(a);
    auto vb = embed(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [k, x] : va) {
      na += x * x;
      auto it = vb.find(k);
      if (it != vb.end()) dot += x * it->second;
    }
    for (const auto& [k, y] : vb) nb += y * y;
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
  }

 private:
  std::unordered_map<std::uint64_t, double> embed(std::string_view text) const {
    std::unordered_map<std::uint64_t, double> v;
    for (const auto& tok : normalize(text)) v[slot(tok)] += 1.0;
    return v;
  }

  std::uint64_t dimension_;
};

// Forwards every call to a scoring service; see remote_scorer.hpp for the
// wire format.
class RemoteScorer final : public EntailmentBackend,
                           public AnswerLogProbBackend,
                           public EmbeddingBackend {
 public:
  explicit RemoteScorer(std::string endpoint, RetryPolicy policy = {})
      : endpoint_(std::move(endpoint)), policy_(policy) {
    parse_endpoint(endpoint_);
  }

  std::string name() const override { return "remote(" + endpoint_ + ")"; }
  const std::string& endpoint() const { return endpoint_; }

  double entailment(std::string_view premise,
                    std::string_view hypothesis) const override {
    ScoringRequest req;
    req.kind = ScoreKind::kEntailment;
    req.premise = std::string(premise);
    req.hypothesis = std::string(hypothesis);
    return remote_score(endpoint_, req, policy_);
  }

  double answer_log_prob(
      std::string_view query, std::string_view answer,
      std::optional<std::string_view> evidence) const override {
    ScoringRequest req;
    req.kind = ScoreKind::kAnswerLogProb;
    req.query = std::string(query);
    req.answer = std::string(answer);
    if (evidence) req.evidence = std::string(*evidence);
    return remote_score(endpoint_, req, policy_);
  }

  double cosine(std::string_view a, std::string_view b) const override {
    ScoringRequest req;
    req.kind = ScoreKind::kEmbedding;
    req.text_a = std::string(a);
    req.text_b = std::string(b);
    return remote_score(endpoint_, req, policy_);
  }

 private:
  std::string endpoint_;
  RetryPolicy policy_;
};

// Logistic function with 1 - sigmoid(x) == sigmoid(-x) holding exactly in
// floating point (the negative branch is defined as a reflection).
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  return 1.0 - 1.0 / (1.0 + std::exp(x));
}

inline double score_faithfulness(std::string_view passages,
                                 std::string_view evidence,
                                 const EntailmentBackend& backend) {
  if (is_blank(passages)) throw ValidationError("empty premise");
  if (is_blank(evidence)) return 0.0;
  return backend.entailment(passages, evidence);
}

// Sig(L1 - L0) for precomputed log-probabilities.
inline double helpfulness_from_log_probs(double with_evidence,
                                         double without_evidence) {
  return sigmoid(with_evidence - without_evidence);
}

inline double score_helpfulness(std::string_view query, std::string_view answer,
                                std::string_view evidence,
                                const AnswerLogProbBackend& backend) {
  if (is_blank(answer)) throw ValidationError("empty answer");
  const auto [l1, l0] = backend.answer_log_prob_pair(query, answer, evidence);
  return helpfulness_from_log_probs(l1, l0);
}

inline double score_conciseness(std::string_view full_answer,
                                std::string_view evidence,
                                const EmbeddingBackend& backend) {
  if (full_answer.empty() || evidence.empty())
    throw ValidationError("empty conciseness input");
  return backend.cosine(full_answer, evidence);
}

// Declarative fallback used when a record has no full-length answer.
inline std::string full_answer_template(std::string_view query,
                                        std::string_view answer) {
  if (query.empty() || answer.empty())
    throw ValidationError("full answer template needs query and answer");
  std::string out = "The answer to \"";
  out.append(query);
  out.append("\" is ");
  out.append(answer);
  out.push_back('.');
  return out;
}

struct ExpertBackends {
  const EntailmentBackend& faithfulness;
  const AnswerLogProbBackend& helpfulness;
  const EmbeddingBackend& conciseness;
};

// Scores one quadruple. Helpfulness and the fallback full answer use the
// first gold answer. Blank evidence gets s_f = 0 and s_c = -1.
inline OracleScores assess(const QuadQARE& quad, const ExpertBackends& experts) {
  const std::string record_id =
      quad.query_id + "#" + std::to_string(quad.candidate_index);
  try {
    if (quad.gold_answers.empty()) throw ValidationError("no gold answers");
    const std::string& answer = quad.gold_answers.front();
    const std::string full = quad.full_answer && !quad.full_answer->empty()
                                 ? *quad.full_answer
                                 : full_answer_template(quad.query, answer);
    OracleScores s;
    s.s_f = score_faithfulness(quad.passages_text(), quad.evidence,
                               experts.faithfulness);
    s.s_h = score_helpfulness(quad.query, answer, quad.evidence,
                              experts.helpfulness);
    s.s_c = is_blank(quad.evidence)
                ? -1.0
                : score_conciseness(full, quad.evidence, experts.conciseness);
    validate(s);
    return s;
  } catch (const RecordError&) {
    throw;
  } catch (const Error& e) {
    throw RecordError(record_id, e.what());
  }
}

// ---------------------------------------------------------------------------
// Backend selection.

struct BackendSpec {
  std::optional<std::string> remote_url;  // nullopt = built-in proxy

  static BackendSpec from_json(const json& j) {
    if (j.is_string()) {
      if (j.get<std::string>() == "proxy") return {};
      throw ConfigError("unknown backend '" + j.get<std::string>() + "'");
    }
    if (j.is_object() && j.contains("remote") && j["remote"].is_string())
      return {j["remote"].get<std::string>()};
    throw ConfigError("backend must be \"proxy\" or {\"remote\": url}");
  }

  json to_json() const {
    if (!remote_url) return "proxy";
    return json{{"remote", *remote_url}};
  }
};

struct ExpertsConfig {
  BackendSpec faithfulness;
  BackendSpec helpfulness;
  BackendSpec conciseness;
  RetryPolicy retry;

  static ExpertsConfig from_json(const json& j) {
    ExpertsConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError("experts config must be an object");
    if (j.contains("faithfulness"))
      c.faithfulness = BackendSpec::from_json(j["faithfulness"]);
    if (j.contains("helpfulness"))
      c.helpfulness = BackendSpec::from_json(j["helpfulness"]);
    if (j.contains("conciseness"))
      c.conciseness = BackendSpec::from_json(j["conciseness"]);
    if (j.contains("retries")) c.retry.max_retries = j["retries"].get<int>();
    if (j.contains("timeout_ms"))
      c.retry.timeout = std::chrono::milliseconds(j["timeout_ms"].get<int>());
    return c;
  }

  json to_json() const {
    return json{{"faithfulness", faithfulness.to_json()},
                {"helpfulness", helpfulness.to_json()},
                {"conciseness", conciseness.to_json()},
                {"retries", retry.max_retries},
                {"timeout_ms", retry.timeout.count()}};
  }
};

// Environment variable that redirects every remote backend to one URL.
inline constexpr const char* kScorerUrlEnv = "EVALIGN_SCORER_URL";

// Owns the three backends chosen by an ExpertsConfig.
class ExpertPanel {
 public:
  explicit ExpertPanel(const ExpertsConfig& cfg) {
    const char* override_url = std::getenv(kScorerUrlEnv);
    auto remote_for = [&](const BackendSpec& spec)
        -> std::optional<std::string> {
      if (!spec.remote_url) return std::nullopt;
      if (override_url && *override_url) return std::string(override_url);
      return spec.remote_url;
    };
    if (auto url = remote_for(cfg.faithfulness)) {
      faith_remote_ = std::make_unique<RemoteScorer>(*url, cfg.retry);
      faith_ = faith_remote_.get();
    } else {
      faith_ = &faith_proxy_;
    }
    if (auto url = remote_for(cfg.helpfulness)) {
      help_remote_ = std::make_unique<RemoteScorer>(*url, cfg.retry);
      help_ = help_remote_.get();
    } else {
      help_ = &help_proxy_;
    }
    if (auto url = remote_for(cfg.conciseness)) {
      concise_remote_ = std::make_unique<RemoteScorer>(*url, cfg.retry);
      concise_ = concise_remote_.get();
    } else {
      concise_ = &concise_proxy_;
    }
  }

  ExpertPanel(const ExpertPanel&) = delete;
  ExpertPanel& operator=(const ExpertPanel&) = delete;

  ExpertBackends backends() const { return {*faith_, *help_, *concise_}; }

  json names() const {
    return json{{"faithfulness", faith_->name()},
                {"helpfulness", help_->name()},
                {"conciseness", concise_->name()}};
  }

 private:
  ContainmentEntailment faith_proxy_;
  SmoothedUnigramLogProb help_proxy_;
  HashedTfEmbedding concise_proxy_;
  std::unique_ptr<RemoteScorer> faith_remote_, help_remote_, concise_remote_;
  const EntailmentBackend* faith_ = nullptr;
  const AnswerLogProbBackend* help_ = nullptr;
  const EmbeddingBackend* concise_ = nullptr;
};

// ---------------------------------------------------------------------------
// Assess-stage output: one line per query holding every candidate's scores.

struct AssessedCandidate {
  std::int64_t candidate_index = 0;
  std::string evidence;
  OracleScores oracle;

  bool operator==(const AssessedCandidate&) const = default;
};

struct ScoredGroup {
  std::string query_id;
  std::string context;  // query, newline, passages joined by newline
  std::vector<AssessedCandidate> candidates;
  json extra = json::object();

  bool operator==(const ScoredGroup&) const = default;
};

inline std::string make_context(const QueryRecord& r) {
  return r.query + "\n" + r.passages_text();
}

inline void to_json(json& j, const OracleScores& s) {
  j = json{{"s_f", s.s_f}, {"s_h", s.s_h}, {"s_c", s.s_c}};
}

inline void from_json(const json& j, OracleScores& s) {
  s.s_f = detail::require_number(j, "s_f");
  s.s_h = detail::require_number(j, "s_h");
  s.s_c = detail::require_number(j, "s_c");
  validate(s);
}

inline void to_json(json& j, const ScoredGroup& g) {
  j = json::object();
  j["query_id"] = g.query_id;
  j["context"] = g.context;
  json cands = json::array();
  for (const auto& c : g.candidates) {
    json cj = c.oracle;
    cj["candidate_index"] = c.candidate_index;
    cj["evidence"] = c.evidence;
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  detail::merge_extra(j, g.extra);
}

inline void from_json(const json& j, ScoredGroup& g) {
  detail::require_object(j);
  g.query_id = detail::require_string(j, "query_id");
  g.context = detail::require_string(j, "context");
  const json& cands = detail::require(j, "candidates");
  if (!cands.is_array()) throw ValidationError("'candidates' must be a list");
  g.candidates.clear();
  for (const auto& cj : cands) {
    AssessedCandidate c;
    c.candidate_index = detail::require_int(cj, "candidate_index");
    c.evidence = detail::require_string(cj, "evidence");
    c.oracle = cj.get<OracleScores>();
    g.candidates.push_back(std::move(c));
  }
  g.extra = detail::extra_fields(j, {"query_id", "context", "candidates"});
}

}  // namespace evalign
