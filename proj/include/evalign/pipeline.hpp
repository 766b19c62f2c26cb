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

// End-to-end orchestration: dedup -> assess -> weight -> pairs -> train-toy
// -> eval, driven by one JSON config.
//
// Every stage has a content-addressed key: sha256 over the stage name, the
// config subset the stage reads, and the sha256 of each input file. A stage
// is skipped when the previous manifest holds the same key and its outputs
// are still on disk with the recorded hashes.

#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evalign/hashing.hpp"
#include "evalign/stages.hpp"

namespace evalign {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<double>& default_tau_grid() {
  static const std::vector<double> grid{0.2, 0.5, 1.0, 2.0, 5.0};
  return grid;
}

struct Ablations {
  bool no_dedup = false;         // skip deduplication
  bool uniform_weights = false;  // alpha = 1/3 for every expert
  bool no_lambda = false;        // lambda = 1 for every pair
};

struct PipelineConfig {
  fs::path records;
  fs::path samples;
  std::optional<fs::path> responses;
  fs::path work_dir = "run";
  DedupConfig dedup;
  ExpertsConfig experts;
  double tau = 1.0;
  std::vector<double> tau_grid = default_tau_grid();
  double beta = 0.1;
  LossForm loss_form = LossForm::kLogRatio;
  int epochs = 200;
  double learning_rate = 0.5;
  std::uint64_t seed = 7;
  Ablations ablations;
  bool dataset_level_cov = false;
  unsigned workers = 1;
  std::string counter = "whitespace";
  std::optional<std::size_t> max_answer_tokens;

  TrainOptions train_options() const {
    TrainOptions t;
    t.epochs = epochs;
    t.learning_rate = learning_rate;
    t.loss.beta = beta;
    t.loss.form = loss_form;
    t.seed = seed;
    return t;
  }

  void validate() const {
    dedup.validate();
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (tau_grid.empty()) throw ConfigError("tau_grid must not be empty");
    for (double t : tau_grid)
      if (!(t > 0.0)) throw ConfigError("tau_grid values must be > 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    token_counter(counter);
  }

  // Paths are resolved against `base` (the config file's directory).
  static PipelineConfig from_json(const json& j, const fs::path& base = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    auto path = [&](const char* key) -> fs::path {
      if (!j.contains(key) || !j[key].is_string())
        throw ConfigError(std::string("config: missing path '") + key + "'");
      fs::path p = j[key].get<std::string>();
      return p.is_absolute() ? p : base / p;
    };
    PipelineConfig c;
    try {
      c.records = path("records");
      c.samples = path("samples");
      if (j.contains("responses")) c.responses = path("responses");
      if (j.contains("work_dir")) c.work_dir = path("work_dir");
      else c.work_dir = base / c.work_dir;
      if (j.contains("dedup")) {
        const auto& d = j["dedup"];
        c.dedup.n = d.value("n", c.dedup.n);
        c.dedup.threshold = d.value("threshold", c.dedup.threshold);
        c.dedup.word_level = d.value("word_level", c.dedup.word_level);
      }
      if (j.contains("experts")) c.experts = ExpertsConfig::from_json(j["experts"]);
      c.tau = j.value("tau", c.tau);
      if (j.contains("tau_grid"))
        c.tau_grid = j["tau_grid"].get<std::vector<double>>();
      c.beta = j.value("beta", c.beta);
      if (j.contains("loss_form"))
        c.loss_form = parse_loss_form(j["loss_form"].get<std::string>());
      c.epochs = j.value("epochs", c.epochs);
      c.learning_rate = j.value("learning_rate", c.learning_rate);
      c.seed = j.value("seed", c.seed);
      if (j.contains("ablations")) {
        const auto& a = j["ablations"];
        c.ablations.no_dedup = a.value("no_dedup", false);
        c.ablations.uniform_weights = a.value("uniform_weights", false);
        c.ablations.no_lambda = a.value("no_lambda", false);
      }
      c.dataset_level_cov = j.value("dataset_level_cov", false);
      c.workers = j.value("workers", 1u);
      c.counter = j.value("counter", c.counter);
      if (j.contains("max_answer_tokens") && !j["max_answer_tokens"].is_null())
        c.max_answer_tokens = j["max_answer_tokens"].get<std::size_t>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static PipelineConfig load(const fs::path& path) {
    return from_json(read_json_file(path), path.parent_path());
  }

  json to_json() const {
    json j{{"records", records.string()},
           {"samples", samples.string()},
           {"work_dir", work_dir.string()},
           {"dedup",
            {{"n", dedup.n},
             {"threshold", dedup.threshold},
             {"word_level", dedup.word_level}}},
           {"experts", experts.to_json()},
           {"tau", tau},
           {"tau_grid", tau_grid},
           {"beta", beta},
           {"loss_form", to_string(loss_form)},
           {"epochs", epochs},
           {"learning_rate", learning_rate},
           {"seed", seed},
           {"ablations",
            {{"no_dedup", ablations.no_dedup},
             {"uniform_weights", ablations.uniform_weights},
             {"no_lambda", ablations.no_lambda}}},
           {"dataset_level_cov", dataset_level_cov},
           {"workers", workers},
           {"counter", counter},
           {"max_answer_tokens",
            max_answer_tokens ? json(*max_answer_tokens) : json(nullptr)}};
    if (responses) j["responses"] = responses->string();
    return j;
  }
};

// Output locations inside the work directory.
struct RunPaths {
  fs::path candidates, scored, ranked, pairs, report, policy, eval, manifest;

  explicit RunPaths(const fs::path& dir)
      : candidates(dir / "candidates.jsonl"),
        scored(dir / "scored.jsonl"),
        ranked(dir / "ranked.jsonl"),
        pairs(dir / "pairs.jsonl"),
        report(dir / "report.json"),
        policy(dir / "policy.jsonl"),
        eval(dir / "eval.jsonl"),
        manifest(dir / "manifest.json") {}
};

struct StageRecord {
  std::string name;
  std::string key;
  std::string status;  // "ran" | "cached"
  std::map<std::string, std::string> inputs;   // file name -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
};

struct RunManifest {
  std::string version = kVersion;
  std::string config_hash;
  std::vector<StageRecord> stages;
  bool ok = true;
  std::string failed_stage;
  std::string failed_record;
  std::string failure;
  json summary = json::object();

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  json to_json() const {
    json st = json::array();
    for (const auto& s : stages)
      st.push_back(json{{"name", s.name},
                        {"key", s.key},
                        {"status", s.status},
                        {"inputs", s.inputs},
                        {"outputs", s.outputs}});
    json j{{"version", version},
           {"config_hash", config_hash},
           {"stages", st},
           {"ok", ok},
           {"summary", summary}};
    if (!ok)
      j["failure"] = json{{"stage", failed_stage},
                          {"record_id", failed_record},
                          {"message", failure}};
    return j;
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    m.version = j.value("version", "");
    m.config_hash = j.value("config_hash", "");
    m.ok = j.value("ok", false);
    if (j.contains("stages"))
      for (const auto& s : j["stages"])
        m.stages.push_back(
            {s.value("name", ""), s.value("key", ""), s.value("status", ""),
             s.value("inputs", std::map<std::string, std::string>{}),
             s.value("outputs", std::map<std::string, std::string>{})});
    if (j.contains("summary")) m.summary = j["summary"];
    if (j.contains("failure")) {
      const auto& f = j["failure"];
      m.failed_stage = f.value("stage", "");
      m.failed_record = f.value("record_id", "");
      m.failure = f.value("message", "");
    }
    return m;
  }
};

class StageFailure : public Error {
 public:
  StageFailure(std::string stage, std::string record_id,
               const std::string& what)
      : Error("stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)),
        record_id_(std::move(record_id)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string stage_;
  std::string record_id_;
};

// Runs stages with content-addressed skipping and records each in the
// manifest.
class StageRunner {
 public:
  StageRunner(RunManifest& manifest, std::optional<RunManifest> previous)
      : manifest_(manifest), previous_(std::move(previous)) {}

  void run(const std::string& name, const std::vector<fs::path>& inputs,
           const std::vector<fs::path>& outputs, const json& params,
           const std::function<void()>& body) {
    StageRecord rec;
    rec.name = name;
    std::string material = name + "\n" + params.dump() + "\n";
    for (const auto& in : inputs) {
      if (!fs::exists(in))
        throw StageFailure(name, "", "missing input '" + in.string() + "'");
      const auto h = sha256_file(in);
      rec.inputs[in.filename().string()] = h;
      material += in.filename().string() + "=" + h + "\n";
    }
    rec.key = sha256_hex(material);

    if (cached(rec, outputs)) {
      rec.status = "cached";
    } else {
      try {
        body();
      } catch (const RecordError& e) {
        throw StageFailure(name, e.record_id(), e.what());
      } catch (const StageFailure&) {
        throw;
      } catch (const Error& e) {
        throw StageFailure(name, "", e.what());
      }
      rec.status = "ran";
    }
    for (const auto& out : outputs)
      rec.outputs[out.filename().string()] = sha256_file(out);
    manifest_.stages.push_back(std::move(rec));
  }

 private:
  bool cached(const StageRecord& rec,
              const std::vector<fs::path>& outputs) const {
    if (!previous_) return false;
    const StageRecord* prev = previous_->find(rec.name);
    if (!prev || prev->key != rec.key) return false;
    for (const auto& out : outputs) {
      auto it = prev->outputs.find(out.filename().string());
      if (it == prev->outputs.end() || !fs::exists(out)) return false;
      if (sha256_file(out) != it->second) return false;
    }
    return true;
  }

  RunManifest& manifest_;
  std::optional<RunManifest> previous_;
};

inline std::optional<RunManifest> read_manifest(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return RunManifest::from_json(read_json_file(path));
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::string config_hash(const PipelineConfig& cfg) {
  return sha256_hex(cfg.to_json().dump());
}

// Executes every stage in dependency order. Writes the manifest whether the
// run succeeds or not; on failure rethrows StageFailure.
inline RunManifest run_pipeline(const PipelineConfig& cfg,
                                const WarningSink& warn = {}) {
  cfg.validate();
  fs::create_directories(cfg.work_dir);
  const RunPaths paths(cfg.work_dir);
  RunManifest manifest;
  manifest.config_hash = config_hash(cfg);
  StageRunner runner(manifest, read_manifest(paths.manifest));

  try {
    runner.run("dedup", {cfg.samples}, {paths.candidates},
               json{{"n", cfg.dedup.n},
                    {"threshold", cfg.dedup.threshold},
                    {"word_level", cfg.dedup.word_level},
                    {"no_dedup", cfg.ablations.no_dedup}},
               [&] {
                 dedup_stage(cfg.samples, paths.candidates, cfg.dedup,
                             cfg.ablations.no_dedup, warn);
               });
    runner.run("assess", {cfg.records, paths.candidates}, {paths.scored},
               json{{"experts", cfg.experts.to_json()}}, [&] {
                 assess_stage(cfg.records, paths.candidates, paths.scored,
                              cfg.experts, cfg.workers);
               });
    const WeightOptions wopt{cfg.tau, cfg.ablations.uniform_weights,
                             cfg.dataset_level_cov};
    runner.run("weight", {paths.scored}, {paths.ranked},
               json{{"tau", wopt.tau},
                    {"uniform_weights", wopt.uniform_weights},
                    {"dataset_level_cov", wopt.dataset_level_cov}},
               [&] { weight_stage(paths.scored, paths.ranked, wopt); });
    runner.run("pairs", {paths.ranked}, {paths.pairs},
               json{{"no_lambda", cfg.ablations.no_lambda}},
               [&] {
                 pairs_stage(paths.ranked, paths.pairs,
                             {cfg.ablations.no_lambda});
               });
    const TrainOptions topt = cfg.train_options();
    runner.run("train-toy", {paths.pairs}, {paths.report, paths.policy},
               json{{"epochs", topt.epochs},
                    {"learning_rate", topt.learning_rate},
                    {"beta", topt.loss.beta},
                    {"form", to_string(topt.loss.form)},
                    {"seed", topt.seed}},
               [&] {
                 train_stage(paths.pairs, paths.report, paths.policy, topt);
               });
    if (cfg.responses) {
      const EvalOptions eopt{cfg.counter, cfg.max_answer_tokens};
      runner.run("eval", {*cfg.responses, cfg.records, paths.policy},
                 {paths.eval},
                 json{{"counter", eopt.counter},
                      {"max_answer_tokens",
                       eopt.max_answer_tokens ? json(*eopt.max_answer_tokens)
                                              : json(nullptr)}},
                 [&] {
                   eval_stage(*cfg.responses, cfg.records, paths.eval,
                              paths.policy, eopt);
                 });
    }
  } catch (const StageFailure& f) {
    manifest.ok = false;
    manifest.failed_stage = f.stage();
    manifest.failed_record = f.record_id();
    manifest.failure = f.what();
    write_json_file(paths.manifest, manifest.to_json());
    throw;
  }

  const json report = read_json_file(paths.report);
  manifest.summary = json{{"mrr", report["mrr"]},
                          {"top1", report["top1"]},
                          {"final_loss", report["final_loss"]},
                          {"pairs", report["pairs"]}};
  if (cfg.responses) {
    const auto results = load_jsonl<EvalResult>(paths.eval);
    const auto s = summarize(results);
    manifest.summary["em"] = s.em;
    manifest.summary["f1"] = s.f1;
    manifest.summary["tok"] = s.tok;
  }
  write_json_file(paths.manifest, manifest.to_json());
  return manifest;
}

struct SweepRow {
  double tau = 0.0;
  bool ok = false;
  std::string error;
  std::size_t pairs = 0;
  double mrr = 0.0;
  double top1 = 0.0;
  double final_loss = 0.0;
};

// Runs weight -> pairs -> train-toy once per tau, reusing the scored
// candidates of a regular run. A failing tau is reported in its row and
// the remaining values still run.
inline std::vector<SweepRow> sweep_tau(const PipelineConfig& cfg,
                                       const WarningSink& warn = {}) {
  if (cfg.tau_grid.empty()) throw ConfigError("tau_grid must not be empty");
  PipelineConfig base = cfg;
  base.responses.reset();
  run_pipeline(base, warn);
  const RunPaths paths(cfg.work_dir);

  std::vector<SweepRow> rows;
  for (double tau : cfg.tau_grid) {
    SweepRow row;
    row.tau = tau;
    std::ostringstream name;
    name << "tau_" << tau;
    const fs::path dir = cfg.work_dir / "sweep" / name.str();
    try {
      fs::create_directories(dir);
      const RunPaths sp(dir);
      weight_stage(paths.scored, sp.ranked,
                   {tau, cfg.ablations.uniform_weights, cfg.dataset_level_cov});
      row.pairs = pairs_stage(sp.ranked, sp.pairs, {cfg.ablations.no_lambda});
      const auto rep =
          train_stage(sp.pairs, sp.report, std::nullopt, cfg.train_options());
      row.mrr = rep.mrr;
      row.top1 = rep.top1;
      row.final_loss = rep.final_loss;
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  json table = json::array();
  for (const auto& r : rows)
    table.push_back(json{{"tau", r.tau},
                         {"ok", r.ok},
                         {"error", r.error},
                         {"pairs", r.pairs},
                         {"mrr", r.mrr},
                         {"top1", r.top1},
                         {"final_loss", r.final_loss}});
  write_json_file(cfg.work_dir / "sweep.json", table);
  return rows;
}

}  // namespace evalign
