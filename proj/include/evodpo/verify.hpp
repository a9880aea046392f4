#pragma once

// Monte-Carlo checks of the analysis: KL bound under parameter error, oracle
// switching budget, window variation identities, the self-normalized
// inequality, the window estimation-error bound, and regret-exponent fits
// comparing evolving and fixed references.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evodpo/env.hpp"
#include "evodpo/evodpo.hpp"
#include "evodpo/sweep.hpp"

namespace evodpo {

struct LemmaReport {
  std::string lemma;
  int trials = 0;
  int violations = 0;  // trials with LHS > RHS (strict)
  int excluded = 0;    // near-degenerate trials left out of `trials`
  double max_slack_ratio = 0.0;  // max LHS / RHS
  double delta = 0.0;            // 0 for deterministic statements
  std::map<std::string, double> constants;

  double violation_rate() const {
    return trials > 0 ? static_cast<double>(violations) / trials : 0.0;
  }
  // delta + 3 sqrt(delta (1 - delta) / trials); 0 when delta is 0.
  double allowed_rate() const;
  bool passed() const;
};

struct KlBoundOptions {
  int arms = 4;
  int dim = 3;
  double beta_min = 0.1;
  double beta_max = 2.0;
};
LemmaReport check_kl_bound(int trials, std::uint64_t seed, const KlBoundOptions& opts = {},
                           Execution exec = Execution::kSerial);

struct DriftRunOptions {
  int horizon = 500;
  int arms = 5;
  int dim = 5;
  DriftConfig drift = drift_between(0.05, 0.5);
  double tv_budget = 1e9;
  std::vector<int> windows{1, 16, 63};  // used by the variation check
};
inline constexpr double kDegenerateMargin = 1e-6;

// B_T <= (2 phi_max / gamma) V_T on one fixed context, with gamma the
// smallest top-two utility gap over the switch-free steps of the path.
LemmaReport check_switching_budget(int runs, std::uint64_t seed,
                                   const DriftRunOptions& opts = {},
                                   Execution exec = Execution::kSerial);

// For every window W in opts.windows and every step t:
//   sum_{tau in W_t} ||theta_t - theta_tau|| <= W V_{t,W}   and
//   sum_t V_{t,W} <= W V_T.
LemmaReport check_local_variation(int runs, std::uint64_t seed,
                                  const DriftRunOptions& opts = {},
                                  Execution exec = Execution::kSerial);

struct SelfNormalizedOptions {
  int window = 100;
  int dim = 5;
  double lambda = 0.1;
};
LemmaReport check_self_normalized(int trials, double delta, std::uint64_t seed,
                                  const SelfNormalizedOptions& opts = {},
                                  Execution exec = Execution::kSerial);

struct EstimationOptions {
  int horizon = 500;
  int arms = 8;
  int dim = 4;
  double kappa = 2.0 / 3.0;
  double lambda = 1.0;
  DriftConfig drift = drift_between(0.0, 0.02);
  int sample_every = 25;
};
LemmaReport check_estimation_error(int runs, double delta, std::uint64_t seed,
                                   const EstimationOptions& opts = {},
                                   Execution exec = Execution::kSerial);

struct ScalingConfig {
  std::vector<int> horizons{2000, 4000, 8000};
  int seeds = 20;
  std::uint64_t seed = 1;
  EvoDpoConfig base;  // horizon and reference mode are overridden per run
  GateMode evolving_gate = GateMode::kAlwaysAccept;
  Execution execution = Execution::kParallel;
};

struct ScalingReport {
  std::vector<int> horizons;
  // [seed][horizon] final cumulative values
  std::vector<std::vector<double>> evolving_regret;
  std::vector<std::vector<double>> fixed_regret;
  std::vector<std::vector<double>> evolving_bias;
  std::vector<std::vector<double>> fixed_bias;
  std::vector<double> evolving_exponent;  // per seed
  std::vector<double> fixed_exponent;
  double evolving_slope = 0.0;  // slope of the seed-mean curves
  double fixed_slope = 0.0;
  double evolving_bias_slope = 0.0;
  double fixed_bias_slope = 0.0;
  double paired_win_fraction = 0.0;  // evolving exponent < fixed exponent
};

// Requires at least 20 seeds and 3 horizons.
ScalingReport check_regret_scaling(const ScalingConfig& cfg);

// Default drift magnitudes spread over the shortest horizon: jumps of norm
// [1, 5] every 250 steps until a budget of 8 runs out, so V_T stays fixed as
// T grows.
EvoDpoConfig sustained_drift_config();

}  // namespace evodpo
