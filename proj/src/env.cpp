#include "evodpo/env.hpp"

#include <cmath>
#include <string>

#include "evodpo/errors.hpp"

namespace evodpo {

void DriftConfig::validate() const {
  if (!(delta_min >= 0.0) || !(delta_max >= delta_min)) {
    throw ContractError("DriftConfig: need 0 <= delta_min <= delta_max");
  }
  if (interval < 1) throw ContractError("DriftConfig: interval must be >= 1");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector advance_theta(const Vector& theta, const DriftConfig& cfg, Rng& rng,
                     double remaining_budget) {
  cfg.validate();
  if (std::abs(theta.norm() - 1.0) > kUnitTolerance) {
    throw ContractError("advance_theta: theta must have unit norm, got " +
                        std::to_string(theta.norm()));
  }
  if (cfg.mode == DriftMode::kFrozen || !(remaining_budget > 0.0)) {
    return theta;
  }
  for (;;) {
    const double magnitude = rng.uniform(cfg.delta_min, cfg.delta_max);
    const Vector delta = magnitude * rng.unit_vector(static_cast<int>(theta.size()));
    const Vector moved = theta + delta;
    const double norm = moved.norm();
    if (norm > 1e-12) return moved / norm;
  }
}

void ThetaPath::advance(const DriftConfig& cfg, Rng& rng) {
  const Vector& last = thetas.back();
  const int t = static_cast<int>(thetas.size());
  const bool drift_step = (t % cfg.interval) == 0;
  if (exhausted || !drift_step || cfg.mode == DriftMode::kFrozen) {
    thetas.push_back(last);
    return;
  }
  Vector next = advance_theta(last, cfg, rng, tv_budget - tv_used);
  const double step = (next - last).norm();
  if (tv_used + step > tv_budget) {
    exhausted = true;
    thetas.push_back(last);
    return;
  }
  tv_used += step;
  thetas.push_back(std::move(next));
}

double utility(const Vector& theta, const Vector& phi) {
  if (theta.size() != phi.size()) {
    throw ContractError("utility: dimension mismatch (" +
                        std::to_string(theta.size()) + " vs " +
                        std::to_string(phi.size()) + ")");
  }
  return theta.dot(phi);
}

Vector utilities(const Vector& theta, const FeatureSet& features) {
  if (theta.size() != features.dim()) {
    throw ContractError("utilities: dimension mismatch");
  }
  return features.rows * theta;
}

PreferenceLabel sample_preference(const Vector& theta, const Vector& phi_a,
                                  const Vector& phi_b, Rng& rng) {
  const double diff = utility(theta, phi_a) - utility(theta, phi_b);
  PreferenceLabel label;
  label.probability_used = sigmoid(diff);
  label.winner_is_first = rng.bernoulli(label.probability_used);
  return label;
}

FeatureSet make_features(int arms, int dim, Rng& rng) {
  if (arms < 2) throw ContractError("make_features: need K >= 2");
  if (dim < 1) throw ContractError("make_features: need d >= 1");
  FeatureSet fs;
  fs.rows.resize(arms, dim);
  for (int a = 0; a < arms; ++a) fs.rows.row(a) = rng.unit_vector(dim).transpose();
  fs.phi_max = 1.0;
  return fs;
}

double sample_reward(const Vector& theta, const Vector& phi, Rng& rng,
                     double noise_scale) {
  const double mean = utility(theta, phi);
  if (noise_scale == 0.0) return mean;
  return mean + noise_scale * rng.normal();
}

ThetaPath make_theta_path(int steps, int dim, const DriftConfig& cfg,
                          double tv_budget, Rng& rng) {
  if (steps < 1) throw ContractError("make_theta_path: steps must be >= 1");
  if (!(tv_budget >= 0.0)) throw ContractError("make_theta_path: negative budget");
  cfg.validate();
  ThetaPath path;
  path.tv_budget = tv_budget;
  path.thetas.reserve(steps);
  path.thetas.push_back(rng.unit_vector(dim));
  while (static_cast<int>(path.thetas.size()) < steps) path.advance(cfg, rng);
  return path;
}

ContextTable make_contexts(ContextMode mode, int steps, int arms, int dim,
                           Rng& rng) {
  ContextTable table;
  table.mode = mode;
  const int count = mode == ContextMode::kFixed ? 1 : steps;
  table.sets.reserve(count);
  for (int i = 0; i < count; ++i) table.sets.push_back(make_features(arms, dim, rng));
  return table;
}

Matrix utility_table(const Vector& theta, const ContextTable& contexts) {
  Matrix out(contexts.size(), contexts.arms());
  for (int x = 0; x < contexts.size(); ++x) {
    out.row(x) = (contexts.sets[x].rows * theta).transpose();
  }
  return out;
}

}  // namespace evodpo
