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

#include "evalign/core_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace evalign {
namespace {

using testing::TempDir;
using testing::write_text;

QueryRecord make_record(const std::string& id) {
  QueryRecord r;
  r.id = id;
  r.query = "who wrote " + id + "?";
  r.gold_answers = {"someone"};
  r.relevant_passages = {"someone wrote " + id + "."};
  return r;
}

TEST(LoadRecords, ThreeLinesInOrder) {
  TempDir dir;
  std::vector<QueryRecord> recs{make_record("a"), make_record("b"),
                                make_record("c")};
  save_records(recs, dir / "r.jsonl");
  const auto loaded = load_records(dir / "r.jsonl");
  ASSERT_EQ(loaded.size(), 3u);
  EXPECT_EQ(loaded[0].id, "a");
  EXPECT_EQ(loaded[1].id, "b");
  EXPECT_EQ(loaded[2].id, "c");
  EXPECT_EQ(loaded, recs);
}

TEST(LoadRecords, EmptyFileGivesEmptyList) {
  TempDir dir;
  write_text(dir / "e.jsonl", "");
  EXPECT_TRUE(load_records(dir / "e.jsonl").empty());
}

TEST(LoadRecords, MissingGoldAnswersNamesLine) {
  TempDir dir;
  write_text(dir / "bad.jsonl",
             R"({"id":"1","query":"q","gold_answers":["a"],"relevant_passages":["p"]})"
             "\n"
             R"({"id":"2","query":"q","relevant_passages":["p"]})"
             "\n");
  try {
    load_records(dir / "bad.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos)
        << e.what();
  }
}

TEST(LoadRecords, MalformedJsonNamesLine) {
  TempDir dir;
  write_text(dir / "bad.jsonl", "\n{not json}\n");
  try {
    load_records(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadRecords, EmptyGoldListRejected) {
  TempDir dir;
  write_text(dir / "bad.jsonl",
             R"({"id":"1","query":"q","gold_answers":[],"relevant_passages":["p"]})"
             "\n");
  EXPECT_THROW(load_records(dir / "bad.jsonl"), ParseError);
}

TEST(LoadRecords, EmptyPassageRejected) {
  TempDir dir;
  write_text(dir / "bad.jsonl",
             R"({"id":"1","query":"q","gold_answers":["a"],"relevant_passages":[""]})"
             "\n");
  EXPECT_THROW(load_records(dir / "bad.jsonl"), ParseError);
}

TEST(LoadRecords, DuplicateIdRejected) {
  TempDir dir;
  save_records(std::vector<QueryRecord>{make_record("x"), make_record("x")},
               dir / "d.jsonl");
  EXPECT_THROW(load_records(dir / "d.jsonl"), ValidationError);
}

TEST(SaveRecords, UnicodeRoundTripIsByteIdentical) {
  TempDir dir;
  QueryRecord r = make_record("u");
  r.query = "Qui a écrit « Les Misérables » ? 日本語 🚀";
  save_records(std::vector<QueryRecord>{r}, dir / "u.jsonl");
  const auto loaded = load_records(dir / "u.jsonl");
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].query, r.query);
  EXPECT_NE(testing::read_text(dir / "u.jsonl").find("日本語"),
            std::string::npos);
}

TEST(SaveRecords, UnknownFieldsSurviveRoundTrip) {
  TempDir dir;
  write_text(dir / "x.jsonl",
             R"({"id":"1","query":"q","gold_answers":["a"],"relevant_passages":["p"],"source":"nq","meta":{"k":[1,2]}})"
             "\n");
  const auto first = load_records(dir / "x.jsonl");
  save_records(first, dir / "y.jsonl");
  const auto second = load_records(dir / "y.jsonl");
  EXPECT_EQ(first, second);
  EXPECT_EQ(second[0].extra["source"], "nq");
  EXPECT_EQ(second[0].extra["meta"]["k"][1], 2);
}

TEST(SaveRecords, NonWritablePathFails) {
  std::vector<QueryRecord> recs{make_record("a")};
  EXPECT_THROW(save_records(recs, "/nonexistent-dir/sub/out.jsonl"), IoError);
}

// Round-trip law over random records, including optional fields.
TEST(SaveRecords, RandomRoundTripProperty) {
  TempDir dir;
  std::mt19937_64 rng(42);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<QueryRecord> recs;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      QueryRecord r;
      r.id = "q" + std::to_string(trial) + "_" + std::to_string(i);
      r.query = testing::random_sentence(rng, 0, 8);
      r.gold_answers = {testing::random_sentence(rng, 1, 3)};
      if (coin(rng)) r.gold_answers.push_back("alt \"quoted\"\ttab");
      if (coin(rng)) r.full_answer = testing::random_sentence(rng, 1, 6);
      r.relevant_passages = {testing::random_sentence(rng, 1, 10)};
      if (coin(rng))
        r.distractor_passages = std::vector<std::string>{"d1", "d2\nline"};
      if (coin(rng)) r.extra["tag"] = static_cast<int>(rng() % 100);
      recs.push_back(std::move(r));
    }
    save_records(recs, dir / "rt.jsonl");
    EXPECT_EQ(load_records(dir / "rt.jsonl"), recs);
  }
}

TEST(CandidateSet, RoundTrip) {
  TempDir dir;
  std::vector<CandidateSet> sets{{"q1", {"a b", "c d"}, true, json::object()}};
  save_jsonl(sets, dir / "c.jsonl");
  EXPECT_EQ(load_jsonl<CandidateSet>(dir / "c.jsonl"), sets);
}

TEST(QuadQARE, MakeQuadsIndexesCandidates) {
  const QueryRecord r = make_record("m");
  const CandidateSet set{"m", {"e0", "e1", "e2"}, true, json::object()};
  const auto quads = make_quads(r, set);
  ASSERT_EQ(quads.size(), 3u);
  for (std::size_t i = 0; i < quads.size(); ++i) {
    EXPECT_EQ(quads[i].candidate_index, static_cast<std::int64_t>(i));
    EXPECT_LT(quads[i].candidate_index,
              static_cast<std::int64_t>(set.candidates.size()));
    EXPECT_EQ(quads[i].evidence, set.candidates[i]);
  }
  TempDir dir;
  save_jsonl(quads, dir / "q.jsonl");
  EXPECT_EQ(load_jsonl<QuadQARE>(dir / "q.jsonl"), quads);
}

TEST(QueryRecord, PassagesJoinWithNewline) {
  QueryRecord r = make_record("j");
  r.relevant_passages = {"first", "second", "third"};
  EXPECT_EQ(r.passages_text(), "first\nsecond\nthird");
}

}  // namespace
}  // namespace evalign
