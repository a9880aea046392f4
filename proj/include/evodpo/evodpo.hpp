#pragma once

// Preference optimization against a phase-indexed reference: the DPO
// objective, its minimizer over the Gibbs-of-linear-reward policy class, the
// candidate-set reference proposal, the accept/reject gate, and the phase
// loop with its fixed-reference baseline.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evodpo/env.hpp"
#include "evodpo/policy.hpp"
#include "evodpo/regret.hpp"

namespace evodpo {

struct PairMeta {
  int phase = 0;
  int island = -1;
  double winner_score = 0.0;
  double loser_score = 0.0;
};

struct PreferencePair {
  int context = 0;
  int winner = 0;
  int loser = 1;
  PairMeta meta;
};

void validate_pairs(std::span<const PreferencePair> pairs, int contexts, int arms);

struct PhaseConfig {
  double beta = 0.6;
  double beta_ref = 0.01;
  double eps_s = 0.0007;
  double delta_H = 0.002;
  int phase_length = 20;
  int gate_size = 32;
  // Score quantile used as the passed/failed threshold when building pairs
  // from island buffers.
  double pair_quantile = 0.5;

  void validate() const;
};

struct PhaseReport {
  int k = 0;
  int n_pairs = 0;
  std::vector<double> loss_trace;
  double delta_S = 0.0;
  double kl_hat = 0.0;
  bool accepted = false;
  bool gate_inert = false;  // fixed-reference baseline: decision not applied
  bool skipped = false;     // empty dataset, no fine-tuning
  int selected_candidate = -1;
  std::vector<int> gate_contexts;
  int reference_before = 0;
  int reference_after = 0;
  double beta = 0.0;
  double eps_s = 0.0;
  double delta_H = 0.0;
};

// Mean over pairs of -log sigmoid(beta [log pi/pi_ref (y+) - log pi/pi_ref (y-)]).
double dpo_loss(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref,
                std::span<const PreferencePair> pairs, double beta);

struct DpoSolverOptions {
  double l2 = 1.0;     // ridge strength, on the same scale as the window estimator
  double tol = 1e-10;  // gradient norm of the mean objective
  int max_iterations = 500;
};

struct DpoFit {
  CategoricalPolicy policy;
  Vector reward_weights;  // w in r_w(x, y) = <w, phi(x, y)>
  std::vector<double> loss_trace;
  double grad_norm = 0.0;
};

// Minimizes dpo_loss + l2/(2N) |w|^2 over pi(y|x) ~ pi_ref(y|x) exp(<w, phi(x,y)>/beta).
// The objective is evaluated through the materialized policy rows (log-ratio
// route), and minimized with BFGS. Empty pair sets return pi_ref unchanged.
DpoFit fit_dpo(const CategoricalPolicy& pi_ref,
               std::span<const PreferencePair> pairs,
               const ContextTable& contexts, double beta,
               const DpoSolverOptions& opts = {});

struct Proposal {
  int index = -1;
  std::vector<double> scores;
  std::vector<double> kls;
  std::vector<double> objectives;
};

// argmax over candidates of S(pi) - beta_ref KL(pi || pi_ref) on the gate
// subset; ties go to the earliest candidate.
Proposal propose_reference(std::span<const CategoricalPolicy* const> candidates,
                           const GateSubset& gate, double beta_ref,
                           const CategoricalPolicy& pi_ref,
                           const Matrix& score_utilities);

// Accept iff delta_S >= eps_s and kl_hat <= delta_H (both inclusive).
bool gate(double delta_S, double kl_hat, const PhaseConfig& cfg);

enum class GateMode { kInspector, kAlwaysAccept, kAlwaysReject };
enum class ReferenceMode { kEvolving, kFixed };
enum class ScorerSource { kEstimated, kOracle };

struct EvoDpoConfig {
  int arms = 5;
  int dim = 5;
  int horizon = 2000;
  ContextMode context_mode = ContextMode::kFresh;
  DriftConfig drift;
  double tv_budget = 8000.0;
  double kappa = 2.0 / 3.0;
  double lambda = 1.0;
  PhaseConfig phase;
  GateMode gate_mode = GateMode::kInspector;
  ReferenceMode reference = ReferenceMode::kEvolving;
  ScorerSource scorer = ScorerSource::kEstimated;
  int max_phases = -1;  // negative: horizon / phase_length

  // Sliding pair window W = ceil(T^kappa).
  int window() const;
  int phase_budget() const;
  void validate() const;
};

struct EvoDpoRun {
  std::vector<PhaseReport> phases;
  RegretLedger ledger;
  ThetaPath path;
  int window = 0;
  CategoricalPolicy final_reference;
};

EvoDpoRun run_evodpo(const EvoDpoConfig& cfg, std::uint64_t seed);

std::string to_string(GateMode mode);
std::string to_string(ReferenceMode mode);

}  // namespace evodpo
