#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "evodpo/env.hpp"
#include "evodpo/errors.hpp"
#include "evodpo/estimator.hpp"
#include "evodpo/evodpo.hpp"
#include "evodpo/policy.hpp"

using namespace evodpo;

namespace {

CategoricalPolicy single_row(double p0) {
  Matrix m(1, 2);
  m << p0, 1.0 - p0;
  return CategoricalPolicy(m);
}

PreferencePair make_pair(int context, int winner, int loser) {
  PreferencePair p;
  p.context = context;
  p.winner = winner;
  p.loser = loser;
  return p;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

ContextTable antipodal_world() {
  FeatureSet fs;
  fs.rows.resize(2, 1);
  fs.rows << 1.0, -1.0;
  ContextTable table;
  table.mode = ContextMode::kFixed;
  table.sets.push_back(fs);
  return table;
}

// Root of 2 n sigmoid(-2a) = l2 a, the stationarity condition of the 1-D fit.
double one_dim_weight(int n, double l2) {
  double lo = 0.0, hi = 2.0 * n / l2 + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (2.0 * n * sigmoid(-2.0 * mid) - l2 * mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> phase_means(const EvoDpoRun& run, int phases) {
  std::vector<double> sums(static_cast<std::size_t>(phases), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(phases), 0);
  for (const LedgerRow& row : run.ledger.rows()) {
    if (row.phase >= 1 && row.phase <= phases) {
      sums[row.phase - 1] += row.regret_step;
      ++counts[row.phase - 1];
    }
  }
  for (int k = 0; k < phases; ++k) sums[k] /= counts[k];
  return sums;
}

EvoDpoConfig small_config() {
  EvoDpoConfig cfg;
  cfg.horizon = 140;
  cfg.drift = drift_between(0.05, 0.3);
  cfg.tv_budget = 10.0;
  return cfg;
}

}  // namespace

TEST_CASE("dpo_loss values") {
  const CategoricalPolicy uniform = CategoricalPolicy::uniform(1, 2);
  const std::vector<PreferencePair> one{make_pair(0, 0, 1)};
  CHECK(std::abs(dpo_loss(uniform, uniform, one, 0.6) - std::log(2.0)) < 1e-15);

  const CategoricalPolicy tilted = single_row(0.75);
  CHECK(std::abs(dpo_loss(tilted, uniform, one, 1.0) - 0.2876820724517809) < 1e-14);
  CHECK(std::abs(dpo_loss(tilted, uniform, one, 1.0) + std::log(sigmoid(std::log(3.0)))) < 1e-14);

  double previous = dpo_loss(tilted, uniform, one, 1.0);
  for (double beta : {2.0, 8.0, 32.0, 128.0}) {
    const double loss = dpo_loss(tilted, uniform, one, beta);
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-12);

  CHECK_THROWS_AS(dpo_loss(uniform, uniform, std::vector<PreferencePair>{}, 1.0), ContractError);
  CHECK_THROWS_AS(dpo_loss(uniform, uniform, std::vector<PreferencePair>{make_pair(0, 1, 1)}, 1.0),
                  ContractError);
}

TEST_CASE("dpo_loss equals the logistic loss on difference features") {
  Rng rng(51);
  for (int trial = 0; trial < 1000; ++trial) {
    const int arms = 2 + trial % 5;
    const int dim = 1 + trial % 4;
    const FeatureSet fs = make_features(arms, dim, rng);
    Matrix ref_row(1, arms);
    for (int a = 0; a < arms; ++a) ref_row(0, a) = rng.uniform(0.05, 1.0);
    const CategoricalPolicy ref(ref_row);
    const Vector w = rng.uniform(0.0, 2.0) * rng.unit_vector(dim);
    const double beta = rng.uniform(0.5, 2.0);
    const CategoricalPolicy pi(gibbs(ref.row(0), fs.rows * w, beta).transpose());
    const int winner = static_cast<int>(rng.index(arms));
    int loser = static_cast<int>(rng.index(arms - 1));
    if (loser >= winner) ++loser;
    const std::vector<PreferencePair> pair{make_pair(0, winner, loser)};
    const double logistic = softplus(-w.dot(fs.feature(winner) - fs.feature(loser)));
    CHECK(std::abs(dpo_loss(pi, ref, pair, beta) - logistic) < 1e-10);
  }
}

TEST_CASE("fit_dpo with no pairs returns the reference") {
  const ContextTable world = antipodal_world();
  const CategoricalPolicy ref = single_row(0.3);
  const DpoFit fit = fit_dpo(ref, std::vector<PreferencePair>{}, world, 0.6);
  CHECK(fit.policy == ref);
}

TEST_CASE("fit_dpo matches the one-dimensional closed form") {
  const ContextTable world = antipodal_world();
  const CategoricalPolicy ref = CategoricalPolicy::uniform(1, 2);
  const double beta = 0.6;
  double previous = 0.5;
  for (int n : {1, 10, 100}) {
    const std::vector<PreferencePair> pairs(static_cast<std::size_t>(n), make_pair(0, 0, 1));
    const DpoFit fit = fit_dpo(ref, pairs, world, beta);
    const double weight = one_dim_weight(n, 1.0);
    const double expected = sigmoid(2.0 * weight / beta);
    CHECK(std::abs(fit.reward_weights[0] - weight) < 1e-8);
    CHECK(std::abs(fit.policy.prob(0, 0) - expected) < 1e-8);
    CHECK(fit.policy.prob(0, 0) > previous);
    previous = fit.policy.prob(0, 0);
  }
}

TEST_CASE("fit_dpo agrees with the window estimator") {
  Rng rng(52);
  const int dim = 5, arms = 5, contexts = 40;
  ContextTable table;
  for (int x = 0; x < contexts; ++x) table.sets.push_back(make_features(arms, dim, rng));
  const Vector theta = rng.unit_vector(dim);
  std::vector<PreferencePair> pairs;
  WindowBuffer buffer(500, dim);
  for (int i = 0; i < 500; ++i) {
    const int x = static_cast<int>(rng.index(contexts));
    const int a = static_cast<int>(rng.index(arms));
    int b = static_cast<int>(rng.index(arms - 1));
    if (b >= a) ++b;
    const FeatureSet& fs = table.sets[x];
    const PreferenceLabel label = sample_preference(theta, fs.feature(a), fs.feature(b), rng);
    const PreferencePair p = label.winner_is_first ? make_pair(x, a, b) : make_pair(x, b, a);
    pairs.push_back(p);
    buffer.push(fs.feature(p.winner) - fs.feature(p.loser), 1.0);
  }
  const CategoricalPolicy ref = CategoricalPolicy::uniform(contexts, arms);
  const double beta = 0.6;
  const DpoFit fit = fit_dpo(ref, pairs, table, beta);
  const WindowEstimate est = fit_logistic_window(buffer, 1.0);
  const CategoricalPolicy via_estimator = gibbs(ref, utility_table(est.theta_hat, table), beta);
  double worst = 0.0;
  for (int x = 0; x < contexts; ++x) {
    worst = std::max(worst, total_variation(fit.policy.row(x), via_estimator.row(x)));
  }
  CHECK(worst <= 0.05);
  CHECK((fit.reward_weights - est.theta_hat).norm() < 1e-6);
}

TEST_CASE("propose_reference") {
  const CategoricalPolicy ref = CategoricalPolicy::uniform(1, 2);
  const GateSubset g{{0}};
  Matrix u(1, 2);
  u << 1.0, 0.0;

  const CategoricalPolicy* only[] = {&ref};
  const Proposal self = propose_reference(only, g, 0.5, ref, u);
  CHECK(self.index == 0);
  CHECK(self.objectives[0] == self.scores[0]);
  CHECK(self.kls[0] == 0.0);

  const CategoricalPolicy low = single_row(0.4), high = single_row(0.6);
  const CategoricalPolicy* pair[] = {&low, &high};
  const Proposal better = propose_reference(pair, g, 0.5, ref, u);
  CHECK(std::abs(better.kls[0] - better.kls[1]) < 1e-15);
  CHECK(better.index == 1);

  const CategoricalPolicy modest = single_row(0.55), greedy = single_row(0.99);
  const CategoricalPolicy* crafted[] = {&greedy, &modest, &ref};
  const Proposal penalized = propose_reference(crafted, g, 1.0, ref, u);
  CHECK(penalized.scores[0] > penalized.scores[1]);
  int brute = 0;
  double best = -1e300;
  for (int i = 0; i < 3; ++i) {
    const Vector row = crafted[i]->row(0);
    const double objective = value(row, u.row(0).transpose()) - 1.0 * kl(row, ref.row(0));
    if (objective > best) {
      best = objective;
      brute = i;
    }
  }
  CHECK(brute == 1);
  CHECK(penalized.index == brute);

  const CategoricalPolicy* tie[] = {&ref, &ref};
  CHECK(propose_reference(tie, g, 1.0, ref, u).index == 0);
  CHECK_THROWS_AS(propose_reference(std::span<const CategoricalPolicy* const>{}, g, 1.0, ref, u),
                  ContractError);
}

TEST_CASE("gate thresholds") {
  const PhaseConfig cfg;
  CHECK(gate(0.001, 0.001, cfg));
  CHECK_FALSE(gate(0.0, 0.001, cfg));
  CHECK_FALSE(gate(1.0, 0.003, cfg));
  CHECK(gate(cfg.eps_s, cfg.delta_H, cfg));
}

TEST_CASE("window length") {
  EvoDpoConfig cfg;
  cfg.horizon = 2000;
  CHECK(cfg.window() == 159);
  cfg.horizon = 8;
  CHECK(cfg.window() == 4);
}

TEST_CASE("frozen drift with an open gate improves phase over phase") {
  std::vector<double> totals(3, 0.0);
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    EvoDpoConfig cfg;
    cfg.horizon = 100;
    cfg.drift.mode = DriftMode::kFrozen;
    cfg.phase.eps_s = 0.0;
    cfg.phase.delta_H = std::numeric_limits<double>::infinity();
    const EvoDpoRun run = run_evodpo(cfg, 1000 + static_cast<std::uint64_t>(s));
    REQUIRE(run.phases.size() == 5);
    for (const PhaseReport& r : run.phases) {
      CHECK(r.accepted);
      CHECK(r.delta_S >= 0.0);
    }
    const std::vector<double> means = phase_means(run, 3);
    for (int k = 0; k < 3; ++k) totals[k] += means[k] / seeds;
  }
  CHECK(totals[1] < totals[0]);
  CHECK(totals[2] < totals[1]);
}

TEST_CASE("fixed reference baseline") {
  EvoDpoConfig cfg = small_config();
  cfg.reference = ReferenceMode::kFixed;
  cfg.phase.delta_H = 10.0;
  cfg.phase.eps_s = 0.0;
  const EvoDpoRun fixed = run_evodpo(cfg, 7);
  CHECK(fixed.final_reference == CategoricalPolicy::uniform(140, 5));
  for (const PhaseReport& r : fixed.phases) {
    CHECK(r.gate_inert);
    CHECK_FALSE(r.accepted);
    CHECK(r.reference_after == 0);
  }

  EvoDpoConfig reject = small_config();
  reject.gate_mode = GateMode::kAlwaysReject;
  reject.phase = cfg.phase;
  const EvoDpoRun rejected = run_evodpo(reject, 7);
  CHECK(rejected.final_reference == fixed.final_reference);
  REQUIRE(rejected.phases.size() == fixed.phases.size());
  for (std::size_t k = 0; k < fixed.phases.size(); ++k) {
    const PhaseReport& a = fixed.phases[k];
    const PhaseReport& b = rejected.phases[k];
    CHECK_FALSE(b.gate_inert);
    CHECK(a.delta_S == b.delta_S);
    CHECK(a.kl_hat == b.kl_hat);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.accepted == b.accepted);
    CHECK(a.selected_candidate == b.selected_candidate);
    CHECK(a.gate_contexts == b.gate_contexts);
  }
  REQUIRE(rejected.ledger.size() == fixed.ledger.size());
  for (std::size_t t = 0; t < fixed.ledger.size(); ++t) {
    const LedgerRow& a = fixed.ledger.rows()[t];
    const LedgerRow& b = rejected.ledger.rows()[t];
    CHECK(a.bias == b.bias);
    CHECK(a.error == b.error);
    CHECK(a.regret_cum == b.regret_cum);
    CHECK(a.oracle_arm == b.oracle_arm);
  }

  reject.max_phases = 1;
  CHECK(run_evodpo(reject, 7).final_reference == CategoricalPolicy::uniform(140, 5));
}

TEST_CASE("accepted phases respect the gate and the KL budget") {
  EvoDpoConfig cfg = small_config();
  cfg.phase.delta_H = 0.3;
  cfg.phase.eps_s = 0.0;
  const int phases = cfg.phase_budget();
  int accepted = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const EvoDpoRun run = run_evodpo(cfg, seed);
    std::vector<CategoricalPolicy> refs;
    for (int k = 0; k <= phases; ++k) {
      EvoDpoConfig prefix = cfg;
      prefix.max_phases = k;
      refs.push_back(run_evodpo(prefix, seed).final_reference);
    }
    for (const PhaseReport& r : run.phases) {
      CHECK(r.accepted == gate(r.delta_S, r.kl_hat, cfg.phase));
      const CategoricalPolicy& before = refs[static_cast<std::size_t>(r.k - 1)];
      const CategoricalPolicy& after = refs[static_cast<std::size_t>(r.k)];
      if (!r.accepted) {
        CHECK(after == before);
        continue;
      }
      ++accepted;
      CHECK(r.kl_hat <= cfg.phase.delta_H);
      CHECK(r.delta_S >= cfg.phase.eps_s);
      double moved = 0.0;
      for (int x : r.gate_contexts) moved += kl(after.row(x), before.row(x));
      moved /= static_cast<double>(r.gate_contexts.size());
      CHECK(moved <= cfg.phase.delta_H);
      CHECK(std::abs(moved - r.kl_hat) < 1e-12);
    }
  }
  CHECK(accepted > 0);
}

TEST_CASE("run_evodpo is deterministic and ledgers are consistent") {
  const EvoDpoConfig cfg = small_config();
  const EvoDpoRun a = run_evodpo(cfg, 3);
  const EvoDpoRun b = run_evodpo(cfg, 3);
  REQUIRE(a.ledger.size() == 140);
  double sum = 0.0;
  for (std::size_t t = 0; t < a.ledger.size(); ++t) {
    const LedgerRow& row = a.ledger.rows()[t];
    CHECK(row.regret_cum == b.ledger.rows()[t].regret_cum);
    CHECK(std::abs(row.regret_step - (row.bias + row.error)) < 1e-12);
    sum += row.regret_step;
  }
  CHECK(std::abs(sum - a.ledger.cumulative()) < 1e-9);
  CHECK(a.final_reference == b.final_reference);
}

TEST_CASE("config validation") {
  EvoDpoConfig cfg;
  cfg.phase.delta_H = 0.0;
  CHECK_THROWS_AS(run_evodpo(cfg, 1), ContractError);
  cfg = EvoDpoConfig{};
  cfg.kappa = 1.0;
  CHECK_THROWS_AS(run_evodpo(cfg, 1), ContractError);
}
