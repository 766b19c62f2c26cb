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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "evalign/alignment.hpp"

namespace evalign {

// |a - b| / max(|a|, |b|); 0 when both are exactly zero.
inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

struct GradCheckOptions {
  int trials = 1000;
  double step = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 1;
  LossForm form = LossForm::kLogRatio;
};

struct GradCheckResult {
  int trials = 0;
  int failures = 0;
  double max_relative_error = 0.0;
  bool passed() const { return failures == 0; }
};

// Compares lpo_grad against central differences of lpo_loss on random
// draws: log-probs uniform in [-10, 0], beta in {0.1, 0.5, 1}, lambda
// uniform in [0, 2].
inline GradCheckResult gradcheck(const GradCheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> logp(-10.0, 0.0);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  constexpr std::array<double, 3> betas{0.1, 0.5, 1.0};
  std::uniform_int_distribution<std::size_t> pick(0, betas.size() - 1);

  GradCheckResult res;
  for (int t = 0; t < opt.trials; ++t) {
    PolicyEval e{logp(rng), logp(rng), logp(rng), logp(rng)};
    LossConfig cfg;
    cfg.beta = betas[pick(rng)];
    cfg.form = opt.form;
    const double lambda = lam(rng);
    const LossGrad g = lpo_grad(e, lambda, cfg);

    auto central = [&](double PolicyEval::*field) {
      PolicyEval up = e, down = e;
      up.*field += opt.step;
      down.*field -= opt.step;
      return (lpo_loss(up, lambda, cfg) - lpo_loss(down, lambda, cfg)) /
             (2.0 * opt.step);
    };
    const double err = std::max(
        relative_error(g.d_logp_w, central(&PolicyEval::logp_w_theta)),
        relative_error(g.d_logp_l, central(&PolicyEval::logp_l_theta)));
    res.max_relative_error = std::max(res.max_relative_error, err);
    if (!(err < opt.tolerance)) ++res.failures;
    ++res.trials;
  }
  return res;
}

}  // namespace evalign
