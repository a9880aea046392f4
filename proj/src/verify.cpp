#include "evodpo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "evodpo/errors.hpp"
#include "evodpo/estimator.hpp"
#include "evodpo/policy.hpp"
#include "evodpo/regret.hpp"

namespace evodpo {

namespace {

// Relative roundoff allowance for the exact (deterministic) inequalities.
constexpr double kRoundoff = 1e-12;

struct Trial {
  double lhs = 0.0;
  double rhs = 0.0;
  bool excluded = false;
  bool violated = false;
};

std::uint64_t run_seed(std::uint64_t seed, std::size_t index) {
  return Rng::substream(seed, Stream::kTrials, index).next();
}

double ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

void tally(LemmaReport& report, const std::vector<Trial>& trials) {
  for (const Trial& t : trials) {
    if (t.excluded) {
      ++report.excluded;
      continue;
    }
    ++report.trials;
    if (t.violated) ++report.violations;
    report.max_slack_ratio = std::max(report.max_slack_ratio, ratio(t.lhs, t.rhs));
  }
}

Vector random_simplex(int k, Rng& rng) {
  Vector w(k);
  for (int i = 0; i < k; ++i) w[i] = -std::log1p(-rng.uniform());
  return floor_and_normalize(w);
}

void require_trials(int trials, const char* what) {
  if (trials < 1) throw ContractError(std::string(what) + ": need at least one trial");
}

}  // namespace

double LemmaReport::allowed_rate() const {
  if (delta <= 0.0 || trials == 0) return 0.0;
  return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / trials);
}

bool LemmaReport::passed() const {
  if (delta <= 0.0) return violations == 0;
  return violation_rate() <= allowed_rate();
}

LemmaReport check_kl_bound(int trials, std::uint64_t seed, const KlBoundOptions& opts,
                           Execution exec) {
  require_trials(trials, "check_kl_bound");
  auto one = [&](std::size_t i) {
    Rng rng = Rng::substream(seed, Stream::kTrials, i);
    const FeatureSet fs = make_features(opts.arms, opts.dim, rng);
    const Vector theta = rng.unit_vector(opts.dim);
    const Vector theta_hat = theta + rng.uniform() * rng.unit_vector(opts.dim);
    const Vector ref = random_simplex(opts.arms, rng);
    const double beta = rng.uniform(opts.beta_min, opts.beta_max);
    Trial t;
    t.lhs = kl(gibbs(ref, fs.rows * theta, beta), gibbs(ref, fs.rows * theta_hat, beta));
    t.rhs = fs.phi_max * fs.phi_max * (theta - theta_hat).squaredNorm() / (2.0 * beta * beta);
    t.violated = t.lhs > t.rhs;
    return t;
  };
  LemmaReport report;
  report.lemma = "kl_bound";
  report.constants = {{"phi_max", 1.0}, {"arms", opts.arms}, {"dim", opts.dim},
                      {"beta_min", opts.beta_min}, {"beta_max", opts.beta_max}};
  tally(report, map_trials<Trial>(static_cast<std::size_t>(trials), one, exec));
  return report;
}

LemmaReport check_switching_budget(int runs, std::uint64_t seed, const DriftRunOptions& opts,
                                   Execution exec) {
  require_trials(runs, "check_switching_budget");
  auto one = [&](std::size_t i) {
    const std::uint64_t s = run_seed(seed, i);
    Rng env_rng = Rng::substream(s, Stream::kEnvironment);
    Rng context_rng = Rng::substream(s, Stream::kContexts);
    const FeatureSet fs = make_features(opts.arms, opts.dim, context_rng);
    const ThetaPath path =
        make_theta_path(opts.horizon, opts.dim, opts.drift, opts.tv_budget, env_rng);
    const std::vector<FeatureSet> per_step(path.size(), fs);
    Trial t;
    t.lhs = switching_count(path.thetas, per_step);
    double gamma = std::numeric_limits<double>::infinity();
    // Margin over the switch-free steps (oracle unchanged from k to k + 1).
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      if (oracle_action(path.thetas[k], fs) != oracle_action(path.thetas[k + 1], fs)) continue;
      Vector u = utilities(path.thetas[k], fs);
      std::sort(u.data(), u.data() + u.size(), std::greater<>());
      gamma = std::min(gamma, u[0] - u[1]);
    }
    const std::vector<double> inc = path_increments(path.thetas);
    double variation = 0.0;
    for (double v : inc) variation += v;
    t.excluded = !std::isfinite(gamma) || gamma < kDegenerateMargin;
    t.rhs = 2.0 * fs.phi_max * variation / gamma;
    t.violated = t.lhs > t.rhs;
    return t;
  };
  LemmaReport report;
  report.lemma = "switching_budget";
  report.constants = {{"phi_max", 1.0}, {"horizon", opts.horizon},
                      {"gamma_floor", kDegenerateMargin}};
  tally(report, map_trials<Trial>(static_cast<std::size_t>(runs), one, exec));
  return report;
}

LemmaReport check_local_variation(int runs, std::uint64_t seed, const DriftRunOptions& opts,
                                  Execution exec) {
  require_trials(runs, "check_local_variation");
  auto one = [&](std::size_t i) {
    const std::uint64_t s = run_seed(seed, i);
    Rng env_rng = Rng::substream(s, Stream::kEnvironment);
    const ThetaPath path =
        make_theta_path(opts.horizon, opts.dim, opts.drift, opts.tv_budget, env_rng);
    const std::vector<double> inc = path_increments(path.thetas);
    double total = 0.0;
    for (double v : inc) total += v;
    Trial worst;
    double worst_ratio = -1.0;
    auto consider = [&](double lhs, double rhs) {
      const bool bad = lhs > rhs * (1.0 + kRoundoff);
      const double r = ratio(lhs, rhs);
      if (bad) worst.violated = true;
      if (r > worst_ratio) {
        worst_ratio = r;
        worst.lhs = lhs;
        worst.rhs = rhs;
      }
    };
    const int horizon = static_cast<int>(path.size());
    for (int w : opts.windows) {
      double sum_v = 0.0;
      for (int t = 0; t < horizon; ++t) {
        const double v = local_variation(inc, t, w);
        sum_v += v;
        double lhs = 0.0;
        for (int tau = std::max(0, t - w); tau < t; ++tau) {
          lhs += (path.thetas[static_cast<std::size_t>(t)] -
                  path.thetas[static_cast<std::size_t>(tau)]).norm();
        }
        consider(lhs, w * v);
      }
      consider(sum_v, w * total);
    }
    return worst;
  };
  LemmaReport report;
  report.lemma = "local_variation";
  report.constants = {{"horizon", opts.horizon}, {"roundoff", kRoundoff}};
  tally(report, map_trials<Trial>(static_cast<std::size_t>(runs), one, exec));
  return report;
}

LemmaReport check_self_normalized(int trials, double delta, std::uint64_t seed,
                                  const SelfNormalizedOptions& opts, Execution exec) {
  require_trials(trials, "check_self_normalized");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("check_self_normalized: delta in (0,1)");
  const double rhs = self_normalized_rhs(opts.window, opts.lambda, opts.dim, delta, 1.0);
  auto one = [&](std::size_t i) {
    Rng rng = Rng::substream(seed, Stream::kTrials, i);
    const Vector theta = rng.unit_vector(opts.dim);
    Vector sum = Vector::Zero(opts.dim);
    for (int k = 0; k < opts.window; ++k) {
      const Vector phi = rng.unit_vector(opts.dim);
      const double p = sigmoid(theta.dot(phi));
      const double label = rng.bernoulli(p) ? 1.0 : 0.0;
      sum += (label - p) * phi;
    }
    Trial t;
    t.lhs = sum.norm();
    t.rhs = rhs;
    t.violated = t.lhs > t.rhs;
    return t;
  };
  LemmaReport report;
  report.lemma = "self_normalized";
  report.delta = delta;
  report.constants = {{"phi_max", 1.0},     {"lambda", opts.lambda}, {"window", opts.window},
                      {"dim", opts.dim},    {"delta", delta},        {"sub_gaussian", 1.0}};
  tally(report, map_trials<Trial>(static_cast<std::size_t>(trials), one, exec));
  return report;
}

LemmaReport check_estimation_error(int runs, double delta, std::uint64_t seed,
                                   const EstimationOptions& opts, Execution exec) {
  require_trials(runs, "check_estimation_error");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("check_estimation_error: delta in (0,1)");
  const int window = static_cast<int>(
      std::ceil(std::pow(static_cast<double>(opts.horizon), opts.kappa) - 1e-9));
  // Difference features: |phi(y1) - phi(y2)| <= 2.
  constexpr double kPhiMax = 2.0;
  constexpr double kThetaMax = 1.0;
  const double m0 = curvature_floor(kThetaMax * kPhiMax);

  struct RunResult {
    std::vector<Trial> checks;
    double min_c = std::numeric_limits<double>::infinity();
  };
  auto one = [&](std::size_t i) {
    const std::uint64_t s = run_seed(seed, i);
    Rng env_rng = Rng::substream(s, Stream::kEnvironment);
    Rng context_rng = Rng::substream(s, Stream::kContexts);
    Rng action_rng = Rng::substream(s, Stream::kActions);
    Rng label_rng = Rng::substream(s, Stream::kLabels);
    const FeatureSet fs = make_features(opts.arms, opts.dim, context_rng);
    const ThetaPath path = make_theta_path(opts.horizon, opts.dim, opts.drift, 1e9, env_rng);
    const std::vector<double> inc = path_increments(path.thetas);
    WindowBuffer buffer(static_cast<std::size_t>(window), opts.dim);
    RunResult out;
    for (int t = 0; t < opts.horizon; ++t) {
      const Vector& theta = path.thetas[static_cast<std::size_t>(t)];
      const int a = static_cast<int>(action_rng.index(static_cast<std::size_t>(opts.arms)));
      int b = static_cast<int>(action_rng.index(static_cast<std::size_t>(opts.arms - 1)));
      if (b >= a) ++b;
      const Vector diff = fs.feature(a) - fs.feature(b);
      const double label = label_rng.bernoulli(sigmoid(theta.dot(diff))) ? 1.0 : 0.0;
      buffer.push(diff, label);
      if (t + 1 < window || (t + 1) % opts.sample_every != 0) continue;
      const WindowEstimate est = fit_logistic_window(buffer, opts.lambda);
      ErrorBoundInputs in;
      in.local_variation = local_variation(inc, t, window);
      in.window = window;
      in.lambda = opts.lambda;
      in.dim = opts.dim;
      in.delta = delta;
      in.m0 = m0;
      in.c = est.lambda_min_cov / window;
      in.phi_max = kPhiMax;
      in.theta_max = kThetaMax;
      out.min_c = std::min(out.min_c, in.c);
      Trial check;
      check.lhs = (est.theta_hat - theta).norm();
      check.rhs = estimation_error_rhs(in);
      check.violated = check.lhs > check.rhs;
      out.checks.push_back(check);
    }
    return out;
  };
  const std::vector<RunResult> results =
      map_trials<RunResult>(static_cast<std::size_t>(runs), one, exec);
  LemmaReport report;
  report.lemma = "estimation_error";
  report.delta = delta;
  double min_c = std::numeric_limits<double>::infinity();
  for (const RunResult& r : results) {
    tally(report, r.checks);
    min_c = std::min(min_c, r.min_c);
  }
  report.constants = {{"phi_max", kPhiMax}, {"theta_max", kThetaMax}, {"m0", m0},
                      {"c_min", min_c},     {"lambda", opts.lambda},  {"window", window},
                      {"delta", delta},     {"dim", opts.dim},        {"arms", opts.arms}};
  return report;
}

EvoDpoConfig sustained_drift_config() {
  EvoDpoConfig cfg;
  cfg.drift = drift_between(1.0, 5.0, 250);
  cfg.tv_budget = 8.0;
  return cfg;
}

ScalingReport check_regret_scaling(const ScalingConfig& cfg) {
  if (cfg.seeds < 20) throw ContractError("check_regret_scaling: need at least 20 seeds");
  if (cfg.horizons.size() < 3) throw ContractError("check_regret_scaling: need 3 horizons");
  const std::size_t n_h = cfg.horizons.size();
  const std::size_t n_s = static_cast<std::size_t>(cfg.seeds);

  struct Cell {
    double regret = 0.0;
    double bias = 0.0;
  };
  // index = (seed * n_h + horizon) * 2 + variant
  auto one = [&](std::size_t idx) {
    const std::size_t variant = idx % 2;
    const std::size_t h = (idx / 2) % n_h;
    const std::size_t s = idx / (2 * n_h);
    EvoDpoConfig run_cfg = cfg.base;
    run_cfg.horizon = cfg.horizons[h];
    run_cfg.max_phases = -1;
    if (variant == 0) {
      run_cfg.reference = ReferenceMode::kEvolving;
      run_cfg.gate_mode = cfg.evolving_gate;
    } else {
      run_cfg.reference = ReferenceMode::kFixed;
    }
    const EvoDpoRun run = run_evodpo(run_cfg, run_seed(cfg.seed, s));
    return Cell{run.ledger.cumulative(), run.ledger.bias_total()};
  };
  const std::vector<Cell> cells = map_trials<Cell>(n_s * n_h * 2, one, cfg.execution);

  ScalingReport report;
  report.horizons = cfg.horizons;
  std::vector<double> hs(cfg.horizons.begin(), cfg.horizons.end());
  std::vector<double> mean_ev(n_h, 0.0), mean_fx(n_h, 0.0), mean_bev(n_h, 0.0),
      mean_bfx(n_h, 0.0);
  int wins = 0;
  for (std::size_t s = 0; s < n_s; ++s) {
    std::vector<double> ev(n_h), fx(n_h), bev(n_h), bfx(n_h);
    for (std::size_t h = 0; h < n_h; ++h) {
      const Cell& e = cells[(s * n_h + h) * 2];
      const Cell& f = cells[(s * n_h + h) * 2 + 1];
      ev[h] = e.regret;
      fx[h] = f.regret;
      bev[h] = e.bias;
      bfx[h] = f.bias;
      mean_ev[h] += e.regret / cfg.seeds;
      mean_fx[h] += f.regret / cfg.seeds;
      mean_bev[h] += e.bias / cfg.seeds;
      mean_bfx[h] += f.bias / cfg.seeds;
    }
    const double ee = slope_fit(hs, ev);
    const double fe = slope_fit(hs, fx);
    report.evolving_exponent.push_back(ee);
    report.fixed_exponent.push_back(fe);
    if (ee < fe) ++wins;
    report.evolving_regret.push_back(std::move(ev));
    report.fixed_regret.push_back(std::move(fx));
    report.evolving_bias.push_back(std::move(bev));
    report.fixed_bias.push_back(std::move(bfx));
  }
  report.evolving_slope = slope_fit(hs, mean_ev);
  report.fixed_slope = slope_fit(hs, mean_fx);
  report.evolving_bias_slope = slope_fit(hs, mean_bev);
  report.fixed_bias_slope = slope_fit(hs, mean_bfx);
  report.paired_win_fraction = static_cast<double>(wins) / cfg.seeds;
  return report;
}

}  // namespace evodpo
