#pragma once

// Finite-action categorical policies and the KL-regularized machinery on top
// of them: Gibbs tilting, exact KL, values, and the gate statistics.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "evodpo/rng.hpp"

namespace evodpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultSupportFloor = 1e-9;

// Clamp entries below `floor` to exactly `floor` and rescale the rest so the
// row sums to one. Ratios between unclamped entries are preserved.
Vector floor_and_normalize(Vector weights, double floor = kDefaultSupportFloor);

// Per-context probability table (contexts x K). Every row is on the simplex
// with all entries >= support_floor.
class CategoricalPolicy {
 public:
  CategoricalPolicy() = default;
  explicit CategoricalPolicy(Matrix table, double floor = kDefaultSupportFloor);

  static CategoricalPolicy uniform(int contexts, int arms,
                                   double floor = kDefaultSupportFloor);

  int contexts() const { return static_cast<int>(table_.rows()); }
  int arms() const { return static_cast<int>(table_.cols()); }
  double support_floor() const { return floor_; }
  Vector row(int context) const { return table_.row(context).transpose(); }
  double prob(int context, int arm) const { return table_(context, arm); }
  const Matrix& table() const { return table_; }

  bool operator==(const CategoricalPolicy& other) const {
    return floor_ == other.floor_ && table_ == other.table_;
  }

 private:
  Matrix table_;
  double floor_ = kDefaultSupportFloor;
};

// pi proportional to pi_ref * exp(u / beta), computed in the log domain with
// a max shift, then floored.
Vector gibbs(const Vector& pi_ref, const Vector& u, double beta,
             double floor = kDefaultSupportFloor);
// Row-wise over a table of utilities (contexts x K).
CategoricalPolicy gibbs(const CategoricalPolicy& ref, const Matrix& utilities,
                        double beta);

// sum p log(p / q), with 0 log 0 = 0. Throws SupportError when q dips below
// the floor.
double kl(const Vector& p, const Vector& q, double floor = kDefaultSupportFloor);

double value(const Vector& pi, const Vector& u);

struct GateSubset {
  std::vector<int> contexts;
  std::size_t size() const { return contexts.size(); }
};

// Sample min(size, |pool|) distinct context ids from pool without
// replacement (partial Fisher-Yates).
GateSubset sample_gate_subset(std::span<const int> pool, std::size_t size,
                              Rng& rng);

double gate_kl_estimate(const CategoricalPolicy& pi,
                        const CategoricalPolicy& pi_ref, const GateSubset& gate);

// Subset mean of value(pi(.|x), utilities.row(x)).
double inspector_score(const CategoricalPolicy& pi, const GateSubset& gate,
                       const Matrix& utilities);

double total_variation(const Vector& p, const Vector& q);

}  // namespace evodpo
