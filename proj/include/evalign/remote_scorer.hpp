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

// HTTP client for model-backed scoring services.
//
// Wire protocol: POST a JSON object
//   {"kind": "entailment" | "answer-logprob" | "embedding",
//    "premise"?, "hypothesis"?, "query"?, "answer"?, "evidence"?,
//    "text_a"?, "text_b"?}
// and read back {"score": <number>}. The score is range-checked per kind:
//   entailment      [0, 1]
//   answer-logprob  (-inf, 0]
//   embedding       [-1, 1]

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>

#include "evalign/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace evalign {

enum class ScoreKind { kEntailment, kAnswerLogProb, kEmbedding };

inline std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kEntailment:
      return "entailment";
    case ScoreKind::kAnswerLogProb:
      return "answer-logprob";
    case ScoreKind::kEmbedding:
      return "embedding";
  }
  return "unknown";
}

struct ScoringRequest {
  ScoreKind kind = ScoreKind::kEntailment;
  std::optional<std::string> premise;
  std::optional<std::string> hypothesis;
  std::optional<std::string> query;
  std::optional<std::string> answer;
  std::optional<std::string> evidence;
  std::optional<std::string> text_a;
  std::optional<std::string> text_b;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    j["kind"] = std::string(to_string(kind));
    auto put = [&](const char* key, const std::optional<std::string>& v) {
      if (v) j[key] = *v;
    };
    put("premise", premise);
    put("hypothesis", hypothesis);
    put("query", query);
    put("answer", answer);
    put("evidence", evidence);
    put("text_a", text_a);
    put("text_b", text_b);
    return j;
  }
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{50};
  std::chrono::milliseconds timeout{5000};
};

inline void check_score_range(ScoreKind kind, double score) {
  if (!std::isfinite(score))
    throw ProtocolError("non-finite score from remote scorer");
  bool ok = true;
  switch (kind) {
    case ScoreKind::kEntailment:
      ok = score >= 0.0 && score <= 1.0;
      break;
    case ScoreKind::kAnswerLogProb:
      ok = score <= 0.0;
      break;
    case ScoreKind::kEmbedding:
      ok = score >= -1.0 && score <= 1.0;
      break;
  }
  if (!ok)
    throw ProtocolError("score " + std::to_string(score) +
                        " out of range for kind '" +
                        std::string(to_string(kind)) + "'");
}

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path;              // e.g. "/score"
};

inline Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re))
    throw ConfigError("invalid scorer endpoint '" + url + "'");
  Endpoint ep{m[1].str(), m[2].matched ? m[2].str() : "/"};
  return ep;
}

// POSTs the request and returns the validated score. Connection failures,
// timeouts and 5xx replies are retried with exponential backoff; other
// failures are not.
inline double remote_score(const std::string& endpoint,
                           const ScoringRequest& request,
                           const RetryPolicy& policy = {}) {
  const Endpoint ep = parse_endpoint(endpoint);
  const std::string body = request.to_json().dump();
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(ep.scheme_host_port);
    const auto secs = policy.timeout.count() / 1000;
    const auto usecs = (policy.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProtocolError("scorer replied HTTP " +
                          std::to_string(res->status));
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("scorer reply is not JSON: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("score") ||
        !reply["score"].is_number())
      throw ProtocolError("scorer reply lacks a numeric 'score'");
    const double score = reply["score"].get<double>();
    check_score_range(request.kind, score);
    return score;
  }
  throw BackendError("scorer at '" + endpoint + "' failed after " +
                     std::to_string(policy.max_retries + 1) +
                     " attempts: " + last_error);
}

}  // namespace evalign
