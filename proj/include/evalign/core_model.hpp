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

// Domain records shared by every stage, and line-delimited JSON I/O.
//
// Every record type round-trips through `to_json`/`from_json`; fields the
// type does not know about are kept in `extra` and written back unchanged.

#pragma once

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "evalign/errors.hpp"
#include "evalign/text.hpp"
#include "json.hpp"

namespace evalign {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& j, std::string_view key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null())
    throw ValidationError("missing field '" + std::string(key) + "'");
  return *it;
}

inline std::string require_string(const json& j, std::string_view key) {
  const json& v = require(j, key);
  if (!v.is_string())
    throw ValidationError("field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<std::string> require_strings(const json& j,
                                                std::string_view key) {
  const json& v = require(j, key);
  if (!v.is_array())
    throw ValidationError("field '" + std::string(key) + "' must be a list");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string())
      throw ValidationError("field '" + std::string(key) +
                            "' must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::optional<std::string> optional_string(const json& j,
                                                  std::string_view key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw ValidationError("field '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

inline std::int64_t require_int(const json& j, std::string_view key) {
  const json& v = require(j, key);
  if (!v.is_number_integer())
    throw ValidationError("field '" + std::string(key) +
                          "' must be an integer");
  return v.get<std::int64_t>();
}

inline double require_number(const json& j, std::string_view key) {
  const json& v = require(j, key);
  if (!v.is_number())
    throw ValidationError("field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline bool require_bool(const json& j, std::string_view key) {
  const json& v = require(j, key);
  if (!v.is_boolean())
    throw ValidationError("field '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

inline json extra_fields(const json& j,
                         std::initializer_list<std::string_view> known) {
  json extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool is_known = false;
    for (auto k : known) is_known = is_known || it.key() == k;
    if (!is_known) extra[it.key()] = it.value();
  }
  return extra;
}

inline void merge_extra(json& j, const json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
}

inline void require_object(const json& j) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
}

}  // namespace detail

struct QueryRecord {
  std::string id;
  std::string query;
  std::vector<std::string> gold_answers;
  std::optional<std::string> full_answer;
  std::vector<std::string> relevant_passages;
  std::optional<std::vector<std::string>> distractor_passages;
  json extra = json::object();

  // Passages joined in passage order with a single newline.
  std::string passages_text() const { return join(relevant_passages, "\n"); }

  bool operator==(const QueryRecord&) const = default;
};

inline void validate(const QueryRecord& r) {
  if (r.gold_answers.empty())
    throw ValidationError("record '" + r.id + "': gold_answers is empty");
  if (r.relevant_passages.empty())
    throw ValidationError("record '" + r.id +
                          "': relevant_passages is empty");
  for (const auto& p : r.relevant_passages)
    if (p.empty())
      throw ValidationError("record '" + r.id + "': empty passage");
  if (r.distractor_passages)
    for (const auto& p : *r.distractor_passages)
      if (p.empty())
        throw ValidationError("record '" + r.id + "': empty distractor");
}

inline void to_json(json& j, const QueryRecord& r) {
  j = json::object();
  j["id"] = r.id;
  j["query"] = r.query;
  j["gold_answers"] = r.gold_answers;
  if (r.full_answer) j["full_answer"] = *r.full_answer;
  j["relevant_passages"] = r.relevant_passages;
  if (r.distractor_passages) j["distractor_passages"] = *r.distractor_passages;
  detail::merge_extra(j, r.extra);
}

inline void from_json(const json& j, QueryRecord& r) {
  detail::require_object(j);
  r.id = detail::require_string(j, "id");
  r.query = detail::require_string(j, "query");
  r.gold_answers = detail::require_strings(j, "gold_answers");
  r.full_answer = detail::optional_string(j, "full_answer");
  r.relevant_passages = detail::require_strings(j, "relevant_passages");
  if (j.contains("distractor_passages") && !j["distractor_passages"].is_null())
    r.distractor_passages = detail::require_strings(j, "distractor_passages");
  else
    r.distractor_passages.reset();
  r.extra = detail::extra_fields(
      j, {"id", "query", "gold_answers", "full_answer", "relevant_passages",
          "distractor_passages"});
  validate(r);
}

struct CandidateSet {
  std::string query_id;
  std::vector<std::string> candidates;
  bool deduped = false;
  json extra = json::object();

  bool operator==(const CandidateSet&) const = default;
};

inline void to_json(json& j, const CandidateSet& c) {
  j = json::object();
  j["query_id"] = c.query_id;
  j["candidates"] = c.candidates;
  j["deduped"] = c.deduped;
  detail::merge_extra(j, c.extra);
}

inline void from_json(const json& j, CandidateSet& c) {
  detail::require_object(j);
  c.query_id = detail::require_string(j, "query_id");
  c.candidates = detail::require_strings(j, "candidates");
  c.deduped = j.contains("deduped") ? detail::require_bool(j, "deduped") : false;
  c.extra = detail::extra_fields(j, {"query_id", "candidates", "deduped"});
}

// One (query, answers, passages, evidence) quadruple.
struct QuadQARE {
  std::string query_id;
  std::int64_t candidate_index = 0;
  std::string query;
  std::vector<std::string> gold_answers;
  std::vector<std::string> relevant_passages;
  std::string evidence;
  std::optional<std::string> full_answer;
  json extra = json::object();

  std::string passages_text() const { return join(relevant_passages, "\n"); }

  bool operator==(const QuadQARE&) const = default;
};

inline void to_json(json& j, const QuadQARE& q) {
  j = json::object();
  j["query_id"] = q.query_id;
  j["candidate_index"] = q.candidate_index;
  j["query"] = q.query;
  j["gold_answers"] = q.gold_answers;
  j["relevant_passages"] = q.relevant_passages;
  j["evidence"] = q.evidence;
  if (q.full_answer) j["full_answer"] = *q.full_answer;
  detail::merge_extra(j, q.extra);
}

inline void from_json(const json& j, QuadQARE& q) {
  detail::require_object(j);
  q.query_id = detail::require_string(j, "query_id");
  q.candidate_index = detail::require_int(j, "candidate_index");
  q.query = detail::require_string(j, "query");
  q.gold_answers = detail::require_strings(j, "gold_answers");
  q.relevant_passages = detail::require_strings(j, "relevant_passages");
  q.evidence = detail::require_string(j, "evidence");
  q.full_answer = detail::optional_string(j, "full_answer");
  q.extra = detail::extra_fields(
      j, {"query_id", "candidate_index", "query", "gold_answers",
          "relevant_passages", "evidence", "full_answer"});
  if (q.candidate_index < 0)
    throw ValidationError("candidate_index must be non-negative");
  if (q.gold_answers.empty()) throw ValidationError("gold_answers is empty");
}

// Builds the quadruples for one deduplicated candidate set.
inline std::vector<QuadQARE> make_quads(const QueryRecord& record,
                                        const CandidateSet& set) {
  std::vector<QuadQARE> quads;
  quads.reserve(set.candidates.size());
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    QuadQARE q;
    q.query_id = record.id;
    q.candidate_index = static_cast<std::int64_t>(i);
    q.query = record.query;
    q.gold_answers = record.gold_answers;
    q.relevant_passages = record.relevant_passages;
    q.evidence = set.candidates[i];
    q.full_answer = record.full_answer;
    quads.push_back(std::move(q));
  }
  return quads;
}

struct GeneratorResponse {
  std::string query_id;
  std::string output;
  std::int64_t token_count = 0;
  std::string counter_name = "whitespace";
  json extra = json::object();

  bool operator==(const GeneratorResponse&) const = default;
};

inline void to_json(json& j, const GeneratorResponse& g) {
  j = json::object();
  j["query_id"] = g.query_id;
  j["output"] = g.output;
  j["token_count"] = g.token_count;
  j["counter_name"] = g.counter_name;
  detail::merge_extra(j, g.extra);
}

inline void from_json(const json& j, GeneratorResponse& g) {
  detail::require_object(j);
  g.query_id = detail::require_string(j, "query_id");
  g.output = detail::require_string(j, "output");
  g.token_count = detail::require_int(j, "token_count");
  g.counter_name = detail::require_string(j, "counter_name");
  g.extra = detail::extra_fields(
      j, {"query_id", "output", "token_count", "counter_name"});
  if (g.token_count < 0)
    throw ValidationError("token_count must be non-negative");
}

// ---------------------------------------------------------------------------
// Line-delimited JSON files.

inline void write_jsonl_line(std::ostream& out, const json& j) {
  out << j.dump() << '\n';
}

template <typename T>
std::vector<T> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() +
                  "': " + std::strerror(errno));
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                       ": " + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                       ": " + e.what());
    }
  }
  return out;
}

template <typename T>
void save_jsonl(std::span<const T> records,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write '" + path.string() +
                  "': " + std::strerror(errno));
  for (const auto& r : records) write_jsonl_line(out, json(r));
  out.flush();
  if (!out)
    throw IoError("write failed for '" + path.string() +
                  "': " + std::strerror(errno));
}

template <typename T>
void save_jsonl(const std::vector<T>& records,
                const std::filesystem::path& path) {
  save_jsonl(std::span<const T>(records), path);
}

inline std::vector<QueryRecord> load_records(
    const std::filesystem::path& path) {
  auto records = load_jsonl<QueryRecord>(path);
  std::unordered_set<std::string> seen;
  for (const auto& r : records)
    if (!seen.insert(r.id).second)
      throw ValidationError(path.string() + ": duplicate record id '" + r.id +
                            "'");
  return records;
}

inline void save_records(std::span<const QueryRecord> records,
                         const std::filesystem::path& path) {
  save_jsonl(records, path);
}

}  // namespace evalign
