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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evalign/gradcheck.hpp"
#include "evalign/pipeline.hpp"

namespace {

using namespace evalign;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence-extraction preference data pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // dedup
  std::string dd_in, dd_out;
  DedupConfig dd_cfg;
  bool dd_bypass = false;
  auto* dd = app.add_subcommand("dedup", "Remove near-duplicate samples");
  dd->add_option("--in", dd_in, "Sample sets (jsonl)")->required();
  dd->add_option("--out", dd_out, "Candidate sets (jsonl)")->required();
  dd->add_option("--n", dd_cfg.n, "n-gram order")->capture_default_str();
  dd->add_option("--threshold", dd_cfg.threshold, "Duplicate threshold")
      ->capture_default_str();
  dd->add_flag("--no-dedup", dd_bypass, "Pass samples through unchanged");

  // assess
  std::string as_records, as_cands, as_out, as_config;
  unsigned as_workers = 1;
  auto* as = app.add_subcommand("assess", "Score candidates with the experts");
  as->add_option("--records", as_records, "Query records (jsonl)")->required();
  as->add_option("--candidates", as_cands, "Candidate sets (jsonl)")
      ->required();
  as->add_option("--out", as_out, "Scored groups (jsonl)")->required();
  as->add_option("--config", as_config,
                 "JSON file selecting backends (object or {\"experts\": ...})");
  as->add_option("--workers", as_workers)->capture_default_str();

  // weight
  std::string wt_in, wt_out;
  WeightOptions wt_opt;
  auto* wt = app.add_subcommand("weight", "CoV-weight and rank candidates");
  wt->add_option("--in", wt_in, "Scored groups (jsonl)")->required();
  wt->add_option("--out", wt_out, "Ranked groups (jsonl)")->required();
  wt->add_option("--tau", wt_opt.tau, "Softmax temperature")
      ->capture_default_str();
  wt->add_flag("--uniform-weights", wt_opt.uniform_weights,
               "Fix every weight at 1/3");
  wt->add_flag("--dataset-level-cov", wt_opt.dataset_level_cov,
               "Compute CoV over the whole file");

  // pairs
  std::string pr_in, pr_out;
  PairOptions pr_opt;
  auto* pr = app.add_subcommand("pairs", "Build lambda-weighted pairs");
  pr->add_option("--in", pr_in, "Ranked groups (jsonl)")->required();
  pr->add_option("--out", pr_out, "Preference pairs (jsonl)")->required();
  pr->add_flag("--no-lambda", pr_opt.no_lambda, "Write lambda = 1");

  // train-toy
  std::string tt_pairs, tt_report, tt_policy, tt_form = "log-ratio",
                                               tt_lambda = "paper";
  TrainOptions tt_opt;
  auto* tt = app.add_subcommand("train-toy", "Train the tabular toy policy");
  tt->add_option("--pairs", tt_pairs, "Preference pairs (jsonl)")->required();
  tt->add_option("--epochs", tt_opt.epochs)->capture_default_str();
  tt->add_option("--lr", tt_opt.learning_rate)->capture_default_str();
  tt->add_option("--beta", tt_opt.loss.beta)->capture_default_str();
  tt->add_option("--seed", tt_opt.seed)->capture_default_str();
  tt->add_option("--init-scale", tt_opt.init_scale)->capture_default_str();
  tt->add_option("--form", tt_form, "log-ratio | literal-ratio")
      ->capture_default_str();
  tt->add_option("--lambda-mode", tt_lambda, "paper | unit")
      ->capture_default_str();
  tt->add_option("--report", tt_report, "Report (json)")->required();
  tt->add_option("--policy", tt_policy, "Selected candidates (jsonl)");

  // gradcheck
  GradCheckOptions gc_opt;
  auto* gc = app.add_subcommand("gradcheck", "Check gradients numerically");
  gc->add_option("--trials", gc_opt.trials)->capture_default_str();
  gc->add_option("--tol", gc_opt.tolerance)->capture_default_str();
  gc->add_option("--seed", gc_opt.seed)->capture_default_str();
  gc->add_option("--step", gc_opt.step, "Central-difference step")->capture_default_str();
  std::string gc_form = "both";
  gc->add_option("--form", gc_form, "log-ratio | literal-ratio | both")
      ->capture_default_str();

  // eval
  std::string ev_resp, ev_records, ev_out, ev_evidence;
  EvalOptions ev_opt;
  std::size_t ev_max_tokens = 0;
  auto* ev = app.add_subcommand("eval", "EM / F1 / token-length metrics");
  ev->add_option("--responses", ev_resp, "Generator responses (jsonl)")
      ->required();
  ev->add_option("--records", ev_records, "Query records (jsonl)")->required();
  ev->add_option("--out", ev_out, "Per-query results (jsonl)")->required();
  auto* ev_max =
      ev->add_option("--max-answer-tokens", ev_max_tokens,
                     "Drop gold answers longer than this");
  ev->add_option("--counter", ev_opt.counter)->capture_default_str();
  ev->add_option("--evidence", ev_evidence,
                 "Selected evidence (jsonl) to measure instead of responses");

  // perturb
  std::string pt_records, pt_pool, pt_out;
  int pt_nsr = 0;
  std::uint64_t pt_seed = 13;
  auto* pt = app.add_subcommand("perturb", "Inject distractor passages");
  pt->add_option("--records", pt_records)->required();
  pt->add_option("--pool", pt_pool, "Distractor pool (jsonl)");
  pt->add_option("--nsr", pt_nsr, "Noise-to-signal ratio in percent")
      ->required();
  pt->add_option("--seed", pt_seed)->capture_default_str();
  pt->add_option("--out", pt_out)->required();

  // export-ppo
  std::string px_in, px_out;
  auto* px = app.add_subcommand("export-ppo", "Write per-candidate rewards");
  px->add_option("--in", px_in, "Ranked groups (jsonl)")->required();
  px->add_option("--out", px_out, "Reward records (jsonl)")->required();

  // run / sweep-tau
  std::string rn_config;
  bool rn_no_dedup = false, rn_uniform = false, rn_no_lambda = false;
  std::string rn_work;
  auto* rn = app.add_subcommand("run", "Run the whole pipeline");
  auto* sw = app.add_subcommand("sweep-tau", "Sweep the CoV temperature");
  for (auto* sub : {rn, sw}) {
    sub->add_option("--config", rn_config, "Pipeline config (json)")
        ->required();
    sub->add_option("--work-dir", rn_work, "Override the work directory");
    sub->add_flag("--no-dedup", rn_no_dedup);
    sub->add_flag("--uniform-weights", rn_uniform);
    sub->add_flag("--no-lambda", rn_no_lambda);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*dd) {
      const auto kept = dedup_stage(dd_in, dd_out, dd_cfg, dd_bypass, warn);
      std::cout << "kept " << kept << " candidates\n";
    } else if (*as) {
      ExpertsConfig cfg;
      if (!as_config.empty()) {
        const json j = read_json_file(as_config);
        cfg = ExpertsConfig::from_json(j.contains("experts") ? j["experts"] : j);
      }
      const auto n = assess_stage(as_records, as_cands, as_out, cfg, as_workers);
      std::cout << "assessed " << n << " candidates\n";
    } else if (*wt) {
      const auto n = weight_stage(wt_in, wt_out, wt_opt);
      std::cout << "weighted " << n << " groups\n";
    } else if (*pr) {
      const auto n = pairs_stage(pr_in, pr_out, pr_opt);
      std::cout << "wrote " << n << " pairs\n";
    } else if (*tt) {
      tt_opt.loss.form = parse_loss_form(tt_form);
      tt_opt.loss.lambda_mode = parse_lambda_mode(tt_lambda);
      const auto rep =
          train_stage(tt_pairs, tt_report, opt_path(tt_policy), tt_opt);
      std::printf("loss %.6f -> %.6f  mrr %.4f  top1 %.4f\n", rep.initial_loss,
                  rep.final_loss, rep.mrr, rep.top1);
    } else if (*gc) {
      bool ok = true;
      std::vector<LossForm> forms{LossForm::kLogRatio, LossForm::kLiteralRatio};
      if (gc_form != "both") forms = {parse_loss_form(gc_form)};
      for (auto form : forms) {
        gc_opt.form = form;
        const auto res = gradcheck(gc_opt);
        std::printf("%-14s trials %d  failures %d  max rel err %.3e\n",
                    to_string(form).c_str(), res.trials, res.failures,
                    res.max_relative_error);
        ok = ok && res.passed();
      }
      return ok ? 0 : 1;
    } else if (*ev) {
      if (ev_max->count() > 0) ev_opt.max_answer_tokens = ev_max_tokens;
      const auto s = eval_stage(ev_resp, ev_records, ev_out,
                                opt_path(ev_evidence), ev_opt);
      std::printf("n %zu  em %.4f  f1 %.4f  tok %.2f (%s)\n", s.n, s.em, s.f1,
                  s.tok, ev_opt.counter.c_str());
    } else if (*pt) {
      const auto n =
          perturb_stage(pt_records, opt_path(pt_pool), pt_nsr, pt_seed, pt_out);
      std::cout << "perturbed " << n << " records\n";
    } else if (*px) {
      const auto n = export_ppo_stage(px_in, px_out);
      std::cout << "wrote " << n << " rewards\n";
    } else if (*rn || *sw) {
      auto cfg = PipelineConfig::load(rn_config);
      if (!rn_work.empty()) cfg.work_dir = rn_work;
      cfg.ablations.no_dedup = cfg.ablations.no_dedup || rn_no_dedup;
      cfg.ablations.uniform_weights = cfg.ablations.uniform_weights || rn_uniform;
      cfg.ablations.no_lambda = cfg.ablations.no_lambda || rn_no_lambda;
      if (*rn) {
        const auto m = run_pipeline(cfg, warn);
        for (const auto& s : m.stages)
          std::cout << s.name << ": " << s.status << "\n";
        std::cout << m.summary.dump() << "\n";
      } else {
        const auto rows = sweep_tau(cfg, warn);
        bool all_ok = true;
        std::printf("%8s %8s %8s %8s %12s\n", "tau", "pairs", "mrr", "top1",
                    "final_loss");
        for (const auto& r : rows) {
          if (r.ok)
            std::printf("%8.2f %8zu %8.4f %8.4f %12.6f\n", r.tau, r.pairs,
                        r.mrr, r.top1, r.final_loss);
          else
            std::printf("%8.2f  error: %s\n", r.tau, r.error.c_str());
          all_ok = all_ok && r.ok;
        }
        return all_ok ? 0 : 1;
      }
    }
  } catch (const StageFailure& e) {
    std::cerr << "error: " << e.what();
    if (!e.record_id().empty()) std::cerr << " (record " << e.record_id() << ")";
    std::cerr << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
