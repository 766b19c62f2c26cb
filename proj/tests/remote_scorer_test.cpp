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

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "evalign/experts.hpp"
#include "httplib.h"

namespace evalign {
namespace {

// Local scorer whose reply is chosen per test.
class FakeScorer {
 public:
  FakeScorer() {
    server_.Post("/score", [this](const httplib::Request& req,
                                  httplib::Response& res) {
      ++calls_;
      last_body_ = req.body;
      if (calls_ <= fail_first_) {
        res.status = 503;
        return;
      }
      res.status = status_;
      res.set_content(reply_, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeScorer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/score";
  }

  std::string reply_ = R"({"score": 0.7})";
  int status_ = 200;
  int fail_first_ = 0;
  std::atomic<int> calls_{0};
  std::string last_body_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy fast(int retries = 2) {
  RetryPolicy p;
  p.max_retries = retries;
  p.initial_backoff = std::chrono::milliseconds(1);
  p.timeout = std::chrono::milliseconds(2000);
  return p;
}

ScoringRequest entail_request() {
  ScoringRequest r;
  r.kind = ScoreKind::kEntailment;
  r.premise = "p";
  r.hypothesis = "h";
  return r;
}

TEST(RemoteScore, ValidScorePassesThrough) {
  FakeScorer s;
  EXPECT_DOUBLE_EQ(remote_score(s.url(), entail_request(), fast()), 0.7);
  const auto body = json::parse(s.last_body_);
  EXPECT_EQ(body["kind"], "entailment");
  EXPECT_EQ(body["premise"], "p");
  EXPECT_FALSE(body.contains("query"));
}

TEST(RemoteScore, OutOfRangeIsProtocolError) {
  FakeScorer s;
  s.reply_ = R"({"score": 1.5})";
  EXPECT_THROW(remote_score(s.url(), entail_request(), fast()), ProtocolError);
  EXPECT_EQ(s.calls_, 1);
}

TEST(RemoteScore, PositiveLogProbIsProtocolError) {
  FakeScorer s;
  s.reply_ = R"({"score": 0.2})";
  ScoringRequest r;
  r.kind = ScoreKind::kAnswerLogProb;
  EXPECT_THROW(remote_score(s.url(), r, fast()), ProtocolError);
}

TEST(RemoteScore, MalformedRepliesAreProtocolErrors) {
  FakeScorer s;
  s.reply_ = "not json";
  EXPECT_THROW(remote_score(s.url(), entail_request(), fast()), ProtocolError);
  s.reply_ = R"({"value": 0.1})";
  EXPECT_THROW(remote_score(s.url(), entail_request(), fast()), ProtocolError);
  s.reply_ = R"({"score": 0.1})";
  s.status_ = 400;
  EXPECT_THROW(remote_score(s.url(), entail_request(), fast()), ProtocolError);
}

TEST(RemoteScore, ServerErrorsAreRetried) {
  FakeScorer s;
  s.fail_first_ = 2;
  EXPECT_DOUBLE_EQ(remote_score(s.url(), entail_request(), fast(2)), 0.7);
  EXPECT_EQ(s.calls_, 3);
}

TEST(RemoteScore, PersistentServerErrorsExhaustRetries) {
  FakeScorer s;
  s.fail_first_ = 100;
  EXPECT_THROW(remote_score(s.url(), entail_request(), fast(2)), BackendError);
  EXPECT_EQ(s.calls_, 3);
}

TEST(RemoteScore, UnreachableEndpointIsBackendError) {
  std::string url;
  {
    FakeScorer s;
    url = s.url();
  }  // server gone, port closed
  try {
    remote_score(url, entail_request(), fast(2));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos)
        << e.what();
  }
}

TEST(RemoteScore, BadEndpointIsConfigError) {
  EXPECT_THROW(remote_score("ftp://x", entail_request()), ConfigError);
}

TEST(ExpertPanel, EnvironmentOverridesRemoteUrl) {
  FakeScorer s;
  ExpertsConfig cfg;
  cfg.faithfulness.remote_url = "http://127.0.0.1:1/never";
  cfg.retry = fast(0);
  ::setenv(kScorerUrlEnv, s.url().c_str(), 1);
  const ExpertPanel panel(cfg);
  ::unsetenv(kScorerUrlEnv);
  EXPECT_EQ(panel.names()["faithfulness"], "remote(" + s.url() + ")");
  EXPECT_EQ(panel.names()["helpfulness"], "proxy-unigram-lm");
  EXPECT_DOUBLE_EQ(panel.backends().faithfulness.entailment("a", "b"), 0.7);
}

TEST(RemoteScorer, HelpfulnessUsesTwoCalls) {
  FakeScorer s;
  s.reply_ = R"({"score": -2.0})";
  const RemoteScorer r(s.url(), fast());
  EXPECT_DOUBLE_EQ(score_helpfulness("q", "a", "e", r), 0.5);
  EXPECT_EQ(s.calls_, 2);
}

}  // namespace
}  // namespace evalign
