#include "evodpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evodpo/errors.hpp"

namespace evodpo {

Vector floor_and_normalize(Vector weights, double floor) {
  const Eigen::Index k = weights.size();
  if (k == 0) throw ContractError("floor_and_normalize: empty vector");
  if (!(floor >= 0.0) || floor * static_cast<double>(k) >= 1.0) {
    throw ContractError("floor_and_normalize: floor incompatible with arm count");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw ContractError("floor_and_normalize: weights must be finite and >= 0");
    }
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw ContractError("floor_and_normalize: zero mass");
  weights /= total;

  std::vector<bool> clamped(static_cast<std::size_t>(k), false);
  for (;;) {
    bool changed = false;
    int n_clamped = 0;
    double free_mass = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!clamped[i] && weights[i] < floor) {
        clamped[i] = true;
        changed = true;
      }
      if (clamped[i]) {
        ++n_clamped;
      } else {
        free_mass += weights[i];
      }
    }
    if (!changed) break;
    const double scale = (1.0 - n_clamped * floor) / free_mass;
    for (Eigen::Index i = 0; i < k; ++i) {
      weights[i] = clamped[i] ? floor : weights[i] * scale;
    }
  }
  return weights;
}

CategoricalPolicy::CategoricalPolicy(Matrix table, double floor)
    : table_(std::move(table)), floor_(floor) {
  if (table_.rows() == 0 || table_.cols() < 2) {
    throw ContractError("CategoricalPolicy: need >= 1 context and >= 2 arms");
  }
  for (Eigen::Index x = 0; x < table_.rows(); ++x) {
    table_.row(x) = floor_and_normalize(table_.row(x).transpose(), floor_).transpose();
  }
}

CategoricalPolicy CategoricalPolicy::uniform(int contexts, int arms,
                                             double floor) {
  return CategoricalPolicy(Matrix::Constant(contexts, arms, 1.0 / arms), floor);
}

Vector gibbs(const Vector& pi_ref, const Vector& u, double beta, double floor) {
  if (!(beta > 0.0)) throw ContractError("gibbs: beta must be positive");
  if (pi_ref.size() != u.size()) throw ContractError("gibbs: size mismatch");
  Vector logits(pi_ref.size());
  for (Eigen::Index i = 0; i < pi_ref.size(); ++i) {
    if (!(pi_ref[i] > 0.0)) {
      throw SupportError("gibbs: reference must have full support");
    }
    logits[i] = std::log(pi_ref[i]) + u[i] / beta;
  }
  const double shift = logits.maxCoeff();
  Vector w = (logits.array() - shift).exp().matrix();
  return floor_and_normalize(std::move(w), floor);
}

CategoricalPolicy gibbs(const CategoricalPolicy& ref, const Matrix& utilities,
                        double beta) {
  if (utilities.rows() != ref.contexts() || utilities.cols() != ref.arms()) {
    throw ContractError("gibbs: utility table shape does not match policy");
  }
  Matrix out(ref.contexts(), ref.arms());
  for (int x = 0; x < ref.contexts(); ++x) {
    out.row(x) = gibbs(ref.row(x), utilities.row(x).transpose(), beta,
                       ref.support_floor())
                     .transpose();
  }
  return CategoricalPolicy(std::move(out), ref.support_floor());
}

double kl(const Vector& p, const Vector& q, double floor) {
  if (p.size() != q.size()) throw ContractError("kl: size mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    // Floored rows can land a few ulps under the floor after renormalizing.
    if (q[i] < floor * (1.0 - 1e-9)) {
      throw SupportError("kl: reference entry " + std::to_string(q[i]) +
                         " below support floor (reference full-support "
                         "assumption violated)");
    }
    if (p[i] > 0.0) sum += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(sum, 0.0);
}

double value(const Vector& pi, const Vector& u) {
  if (pi.size() != u.size()) throw ContractError("value: size mismatch");
  return pi.dot(u);
}

GateSubset sample_gate_subset(std::span<const int> pool, std::size_t size,
                              Rng& rng) {
  if (size == 0) throw ContractError("sample_gate_subset: size must be >= 1");
  std::vector<int> ids(pool.begin(), pool.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t take = std::min(size, ids.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(take);
  return {std::move(ids)};
}

double gate_kl_estimate(const CategoricalPolicy& pi,
                        const CategoricalPolicy& pi_ref, const GateSubset& gate) {
  if (gate.contexts.empty()) throw ContractError("gate_kl_estimate: empty gate subset");
  double sum = 0.0;
  for (int x : gate.contexts) {
    sum += kl(pi.row(x), pi_ref.row(x), pi_ref.support_floor());
  }
  return sum / static_cast<double>(gate.size());
}

double inspector_score(const CategoricalPolicy& pi, const GateSubset& gate,
                       const Matrix& utilities) {
  if (gate.contexts.empty()) throw ContractError("inspector_score: empty gate subset");
  double sum = 0.0;
  for (int x : gate.contexts) {
    sum += value(pi.row(x), utilities.row(x).transpose());
  }
  return sum / static_cast<double>(gate.size());
}

double total_variation(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw ContractError("total_variation: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

}  // namespace evodpo
