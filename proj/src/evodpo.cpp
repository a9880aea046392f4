#include "evodpo/evodpo.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <unordered_map>

#include "evodpo/errors.hpp"

namespace evodpo {

namespace {

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

void check_policy_pair(const CategoricalPolicy& pi, const CategoricalPolicy& ref) {
  if (pi.contexts() != ref.contexts() || pi.arms() != ref.arms()) {
    throw ContractError("policy shapes differ");
  }
}

double log_ratio(double p, double q, double floor) {
  if (!(q >= floor * (1.0 - 1e-9))) {
    throw SupportError("reference probability " + std::to_string(q) +
                       " below the support floor; the reference must keep full support");
  }
  if (!(p > 0.0)) throw SupportError("policy assigns zero mass to a paired action");
  return std::log(p) - std::log(q);
}

// Log-probabilities of pi(.|x) ~ pi_ref(.|x) exp(u / beta), before any
// support floor is applied.
Vector log_gibbs_row(const Vector& ref_row, const Vector& u, double beta) {
  const Vector logits = ref_row.array().log().matrix() + u / beta;
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return logits.array() - lse;
}

// Objective of fit_dpo evaluated through the log-probability rows of the
// tilted policy, one row per context per evaluation.
struct DpoObjective {
  const CategoricalPolicy& ref;
  std::span<const PreferencePair> pairs;
  const ContextTable& contexts;
  double beta;
  double l2;

  double value(const Vector& w, Vector* grad) const {
    const double n = static_cast<double>(pairs.size());
    std::unordered_map<int, Vector> rows;
    double loss = 0.0;
    if (grad) *grad = (l2 / n) * w;
    for (const PreferencePair& p : pairs) {
      const FeatureSet& fs = contexts.sets[static_cast<std::size_t>(p.context)];
      auto it = rows.find(p.context);
      if (it == rows.end()) {
        it = rows.emplace(p.context, log_gibbs_row(ref.row(p.context), fs.rows * w, beta))
                 .first;
      }
      const Vector& log_pi = it->second;
      const double margin =
          beta * ((log_pi[p.winner] - std::log(ref.prob(p.context, p.winner))) -
                  (log_pi[p.loser] - std::log(ref.prob(p.context, p.loser))));
      loss += softplus(-margin);
      if (grad) {
        const double weight = -sigmoid(-margin) / n;
        *grad += weight * (fs.rows.row(p.winner) - fs.rows.row(p.loser)).transpose();
      }
    }
    return loss / n + 0.5 * (l2 / n) * w.squaredNorm();
  }
};

}  // namespace

void validate_pairs(std::span<const PreferencePair> pairs, int contexts, int arms) {
  for (const PreferencePair& p : pairs) {
    if (p.context < 0 || p.context >= contexts) {
      throw ContractError("pair context " + std::to_string(p.context) + " out of range");
    }
    if (p.winner < 0 || p.winner >= arms || p.loser < 0 || p.loser >= arms) {
      throw ContractError("pair action out of range");
    }
    if (p.winner == p.loser) throw ContractError("pair winner equals loser");
  }
}

void PhaseConfig::validate() const {
  if (!(beta > 0.0)) throw ContractError("beta must be > 0");
  if (!(beta_ref > 0.0)) throw ContractError("beta_ref must be > 0");
  if (!(eps_s >= 0.0)) throw ContractError("eps_s must be >= 0");
  if (!(delta_H > 0.0)) throw ContractError("delta_H must be > 0");
  if (phase_length < 1) throw ContractError("phase_length must be >= 1");
  if (gate_size < 1) throw ContractError("gate_size must be >= 1");
  if (!(pair_quantile >= 0.0 && pair_quantile <= 1.0)) {
    throw ContractError("pair_quantile must lie in [0, 1]");
  }
}

double dpo_loss(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref,
                std::span<const PreferencePair> pairs, double beta) {
  if (pairs.empty()) throw ContractError("dpo_loss: empty pair set");
  if (!(beta > 0.0)) throw ContractError("dpo_loss: beta must be > 0");
  check_policy_pair(pi, pi_ref);
  validate_pairs(pairs, pi.contexts(), pi.arms());
  const double floor = pi_ref.support_floor();
  double total = 0.0;
  for (const PreferencePair& p : pairs) {
    const double margin =
        beta * (log_ratio(pi.prob(p.context, p.winner), pi_ref.prob(p.context, p.winner), floor) -
                log_ratio(pi.prob(p.context, p.loser), pi_ref.prob(p.context, p.loser), floor));
    total += softplus(-margin);
  }
  return total / static_cast<double>(pairs.size());
}

DpoFit fit_dpo(const CategoricalPolicy& pi_ref,
               std::span<const PreferencePair> pairs,
               const ContextTable& contexts, double beta,
               const DpoSolverOptions& opts) {
  if (!(beta > 0.0)) throw ContractError("fit_dpo: beta must be > 0");
  if (!(opts.l2 > 0.0)) throw ContractError("fit_dpo: l2 must be > 0");
  if (contexts.size() != pi_ref.contexts() || contexts.arms() != pi_ref.arms()) {
    throw ContractError("fit_dpo: context table does not match the reference");
  }
  const int d = contexts.dim();
  DpoFit out;
  out.reward_weights = Vector::Zero(d);
  if (pairs.empty()) {
    out.policy = pi_ref;
    return out;
  }
  validate_pairs(pairs, pi_ref.contexts(), pi_ref.arms());

  const DpoObjective objective{pi_ref, pairs, contexts, beta, opts.l2};
  Vector w = Vector::Zero(d);
  Vector grad(d);
  double f = objective.value(w, &grad);
  out.loss_trace.push_back(f);
  Matrix inv_hessian = Matrix::Identity(d, d);
  constexpr double kArmijo = 1e-4;
  const double slack = 8.0 * std::numeric_limits<double>::epsilon();

  int iter = 0;
  for (; iter < opts.max_iterations && grad.norm() > opts.tol; ++iter) {
    Vector direction = -inv_hessian * grad;
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      direction = -grad;
      slope = -grad.squaredNorm();
    }
    double step = 1.0;
    Vector trial(d);
    Vector trial_grad(d);
    double trial_f = 0.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      trial = w + step * direction;
      trial_f = objective.value(trial, &trial_grad);
      if (trial_f <= f + kArmijo * step * slope + slack * std::abs(f)) {
        moved = true;
        break;
      }
    }
    if (!moved) break;
    const Vector s = trial - w;
    const Vector y = trial_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Matrix left = Matrix::Identity(d, d) - rho * s * y.transpose();
      inv_hessian = left * inv_hessian * left.transpose() + rho * s * s.transpose();
    }
    w = trial;
    grad = trial_grad;
    f = trial_f;
    out.loss_trace.push_back(f);
  }
  out.grad_norm = grad.norm();
  // Stalled line searches at roundoff level still count as converged.
  if (out.grad_norm > opts.tol && out.grad_norm > 1e-7) {
    throw ConvergenceError("fit_dpo: gradient norm " + std::to_string(out.grad_norm) +
                               " after " + std::to_string(iter) + " iterations",
                           w, out.grad_norm);
  }
  out.reward_weights = w;
  out.policy = gibbs(pi_ref, utility_table(w, contexts), beta);
  return out;
}

Proposal propose_reference(std::span<const CategoricalPolicy* const> candidates,
                           const GateSubset& gate, double beta_ref,
                           const CategoricalPolicy& pi_ref,
                           const Matrix& score_utilities) {
  if (candidates.empty()) throw ContractError("propose_reference: empty candidate set");
  if (!(beta_ref > 0.0)) throw ContractError("propose_reference: beta_ref must be > 0");
  Proposal out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CategoricalPolicy& c = *candidates[i];
    const double score = inspector_score(c, gate, score_utilities);
    const double divergence = gate_kl_estimate(c, pi_ref, gate);
    const double objective = score - beta_ref * divergence;
    out.scores.push_back(score);
    out.kls.push_back(divergence);
    out.objectives.push_back(objective);
    if (objective > best) {
      best = objective;
      out.index = static_cast<int>(i);
    }
  }
  return out;
}

bool gate(double delta_S, double kl_hat, const PhaseConfig& cfg) {
  return delta_S >= cfg.eps_s && kl_hat <= cfg.delta_H;
}

int EvoDpoConfig::window() const {
  return static_cast<int>(std::ceil(std::pow(static_cast<double>(horizon), kappa) - 1e-9));
}

int EvoDpoConfig::phase_budget() const {
  return max_phases >= 0 ? max_phases : horizon / phase.phase_length;
}

void EvoDpoConfig::validate() const {
  if (arms < 2) throw ContractError("K must be >= 2");
  if (dim < 1) throw ContractError("d must be >= 1");
  if (horizon < 1) throw ContractError("H must be >= 1");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ContractError("kappa must lie in (0, 1)");
  if (!(lambda > 0.0)) throw ContractError("lambda must be > 0");
  if (!(tv_budget >= 0.0)) throw ContractError("V_T must be >= 0");
  drift.validate();
  phase.validate();
}

EvoDpoRun run_evodpo(const EvoDpoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng env_rng = Rng::substream(seed, Stream::kEnvironment);
  Rng context_rng = Rng::substream(seed, Stream::kContexts);
  Rng label_rng = Rng::substream(seed, Stream::kLabels);
  Rng action_rng = Rng::substream(seed, Stream::kActions);
  Rng gate_rng = Rng::substream(seed, Stream::kGate);

  const int horizon = cfg.horizon;
  const int arms = cfg.arms;
  const PhaseConfig& pc = cfg.phase;
  EvoDpoRun run;
  run.window = cfg.window();
  run.path = make_theta_path(horizon, cfg.dim, cfg.drift, cfg.tv_budget, env_rng);
  const ContextTable contexts =
      make_contexts(cfg.context_mode, horizon, arms, cfg.dim, context_rng);

  CategoricalPolicy reference = CategoricalPolicy::uniform(contexts.size(), arms);
  CategoricalPolicy policy = reference;
  // Comparator chain for the bias/error split: KL-regularized improvement of
  // the comparator reference under the true utilities, promoted exactly when
  // the run promotes its own reference.
  CategoricalPolicy comparator = reference;
  int reference_version = 0;

  std::deque<PreferencePair> dataset;
  const std::size_t dataset_cap = static_cast<std::size_t>(run.window);
  const int phase_budget = cfg.phase_budget();
  const DpoSolverOptions solver{cfg.lambda};
  int phases_done = 0;

  for (int t = 0; t < horizon; ++t) {
    const Vector& theta = run.path.thetas[static_cast<std::size_t>(t)];
    const int x = contexts.context_at(t);
    const FeatureSet& fs = contexts.sets[static_cast<std::size_t>(x)];
    const Vector u = utilities(theta, fs);
    const int star = oracle_action(u);
    const bool switched =
        t > 0 && oracle_action(run.path.thetas[static_cast<std::size_t>(t - 1)], fs) != star;
    const Vector pi_kl = gibbs(comparator.row(x), u, pc.beta_ref);
    Vector row = policy.row(x);
    run.ledger.append(t, phases_done + 1,
                      regret_decompose(u, one_hot(arms, star), pi_kl, row), star,
                      switched);

    const int first = static_cast<int>(action_rng.categorical(
        std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    row[first] = 0.0;
    const int second = static_cast<int>(action_rng.categorical(
        std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    const PreferenceLabel label =
        sample_preference(theta, fs.feature(first), fs.feature(second), label_rng);
    PreferencePair pair;
    pair.context = x;
    pair.winner = label.winner_is_first ? first : second;
    pair.loser = label.winner_is_first ? second : first;
    pair.meta.phase = phases_done + 1;
    dataset.push_back(pair);
    if (dataset.size() > dataset_cap) dataset.pop_front();

    if ((t + 1) % pc.phase_length != 0 || phases_done >= phase_budget) continue;

    ++phases_done;
    PhaseReport report;
    report.k = phases_done;
    report.n_pairs = static_cast<int>(dataset.size());
    report.beta = pc.beta;
    report.eps_s = pc.eps_s;
    report.delta_H = pc.delta_H;
    report.reference_before = reference_version;
    report.gate_inert = cfg.reference == ReferenceMode::kFixed;
    if (dataset.empty()) {
      report.skipped = true;
      report.reference_after = reference_version;
      run.phases.push_back(std::move(report));
      continue;
    }

    const std::vector<PreferencePair> pairs(dataset.begin(), dataset.end());
    const std::span<const PreferencePair> all(pairs);
    DpoFit final_fit = fit_dpo(reference, all, contexts, pc.beta, solver);
    const std::size_t half = pairs.size() / 2;
    DpoFit mid_fit = half > 0 ? fit_dpo(reference, all.first(half), contexts, pc.beta, solver)
                              : final_fit;
    report.loss_trace = final_fit.loss_trace;

    std::vector<int> pool;
    pool.reserve(pairs.size());
    for (const PreferencePair& p : pairs) pool.push_back(p.context);
    const GateSubset subset =
        sample_gate_subset(pool, static_cast<std::size_t>(pc.gate_size), gate_rng);

    const Matrix true_utilities = utility_table(theta, contexts);
    const Matrix score_utilities = cfg.scorer == ScorerSource::kOracle
                                       ? true_utilities
                                       : utility_table(final_fit.reward_weights, contexts);
    const CategoricalPolicy* candidates[] = {&final_fit.policy, &mid_fit.policy, &reference};
    const Proposal proposal =
        propose_reference(candidates, subset, pc.beta_ref, reference, score_utilities);
    const std::size_t chosen = static_cast<std::size_t>(proposal.index);
    report.selected_candidate = proposal.index;
    report.gate_contexts = subset.contexts;
    report.delta_S = proposal.scores[chosen] - proposal.scores[2];
    report.kl_hat = proposal.kls[chosen];

    bool accept = false;
    switch (cfg.gate_mode) {
      case GateMode::kInspector: accept = gate(report.delta_S, report.kl_hat, pc); break;
      case GateMode::kAlwaysAccept: accept = true; break;
      case GateMode::kAlwaysReject: accept = false; break;
    }
    if (report.gate_inert) accept = false;
    report.accepted = accept;
    if (accept) {
      CategoricalPolicy promoted = *candidates[chosen];
      reference = std::move(promoted);
      comparator = gibbs(comparator, true_utilities, pc.beta_ref);
      ++reference_version;
    }
    report.reference_after = reference_version;
    policy = std::move(final_fit.policy);
    run.phases.push_back(std::move(report));
  }
  run.final_reference = reference;
  return run;
}

std::string to_string(GateMode mode) {
  switch (mode) {
    case GateMode::kInspector: return "inspector";
    case GateMode::kAlwaysAccept: return "always-accept";
    case GateMode::kAlwaysReject: return "always-reject";
  }
  return "unknown";
}

std::string to_string(ReferenceMode mode) {
  return mode == ReferenceMode::kFixed ? "fixed" : "evolving";
}

}  // namespace evodpo
