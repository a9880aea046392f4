#pragma once

// Drifting Bradley-Terry environment: unit-sphere parameter path with total
// variation accounting, unit-norm action features, preference and reward
// sampling.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "evodpo/rng.hpp"

namespace evodpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kUnitTolerance = 1e-12;

// One context: K action feature rows phi(x, y) in R^d.
struct FeatureSet {
  Matrix rows;  // K x d
  double phi_max = 1.0;

  int arms() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
  Vector feature(int arm) const { return rows.row(arm).transpose(); }
};

enum class DriftMode { kSphereWalk, kFrozen };

struct DriftConfig {
  double delta_min = 1.0;
  double delta_max = 5.0;
  DriftMode mode = DriftMode::kSphereWalk;
  // Drift is applied on steps t with t % interval == 0; 1 = every step.
  int interval = 1;

  void validate() const;
};

inline DriftConfig drift_between(double lo, double hi, int interval = 1) {
  DriftConfig cfg;
  cfg.delta_min = lo;
  cfg.delta_max = hi;
  cfg.interval = interval;
  return cfg;
}

struct ThetaPath {
  std::vector<Vector> thetas;
  double tv_used = 0.0;
  double tv_budget = 0.0;
  bool exhausted = false;

  std::size_t size() const { return thetas.size(); }
  // Appends the next parameter, freezing drift for good once a step would
  // overrun the budget.
  void advance(const DriftConfig& cfg, Rng& rng);
};

struct PreferenceLabel {
  bool winner_is_first = false;
  double probability_used = 0.5;
};

double sigmoid(double z);

// theta_{t+1} = (theta_t + delta_t) / ||theta_t + delta_t||. Returns theta
// unchanged when drift is frozen or remaining_budget is not positive.
Vector advance_theta(const Vector& theta, const DriftConfig& cfg, Rng& rng,
                     double remaining_budget = 1e300);

double utility(const Vector& theta, const Vector& phi);
// Utilities of every arm in a context.
Vector utilities(const Vector& theta, const FeatureSet& features);

PreferenceLabel sample_preference(const Vector& theta, const Vector& phi_a,
                                  const Vector& phi_b, Rng& rng);

FeatureSet make_features(int arms, int dim, Rng& rng);

double sample_reward(const Vector& theta, const Vector& phi, Rng& rng,
                     double noise_scale = 1.0);

ThetaPath make_theta_path(int steps, int dim, const DriftConfig& cfg,
                          double tv_budget, Rng& rng);

enum class ContextMode { kFresh, kFixed };

// Context sequence of a run. Fresh mode stores one FeatureSet per step and
// step t sees context id t; fixed mode shares one FeatureSet (id 0).
struct ContextTable {
  ContextMode mode = ContextMode::kFresh;
  std::vector<FeatureSet> sets;

  int context_at(int step) const {
    return mode == ContextMode::kFixed ? 0 : step;
  }
  int size() const { return static_cast<int>(sets.size()); }
  int arms() const { return sets.front().arms(); }
  int dim() const { return sets.front().dim(); }
};

ContextTable make_contexts(ContextMode mode, int steps, int arms, int dim,
                           Rng& rng);

// contexts x K matrix of utilities under theta.
Matrix utility_table(const Vector& theta, const ContextTable& contexts);

}  // namespace evodpo
