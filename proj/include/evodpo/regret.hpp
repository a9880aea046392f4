#pragma once

// Dynamic-regret accounting: oracle actions, the bias/error decomposition,
// oracle switch counts, window variation, NMR and scaling-exponent fits.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "evodpo/env.hpp"

namespace evodpo {

struct RegretTerms {
  double bias = 0.0;   // J(pi*) - J(pi_kl)
  double error = 0.0;  // J(pi_kl) - J(pi)
  double regret = 0.0; // J(pi*) - J(pi)
};

struct LedgerRow {
  int t = 0;
  int phase = 0;
  double bias = 0.0;
  double error = 0.0;
  double regret_step = 0.0;
  double regret_cum = 0.0;
  int oracle_arm = 0;
  bool switched = false;
};

class RegretLedger {
 public:
  void append(int t, int phase, const RegretTerms& terms, int oracle_arm,
              bool switched);

  const std::vector<LedgerRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  double cumulative() const { return rows_.empty() ? 0.0 : rows_.back().regret_cum; }
  double bias_total() const { return bias_total_; }
  double error_total() const { return error_total_; }
  int switches() const { return switches_; }

 private:
  std::vector<LedgerRow> rows_;
  double bias_total_ = 0.0;
  double error_total_ = 0.0;
  int switches_ = 0;
};

// argmax with ties to the lowest index.
int oracle_action(const Vector& utilities);
int oracle_action(const Vector& theta, const FeatureSet& features);

Vector one_hot(int arms, int arm);

RegretTerms regret_decompose(const Vector& u, const Vector& pi_star,
                             const Vector& pi_kl, const Vector& pi);

// Number of t >= 1 (0-based) with y*_t(x_t) != y*_{t-1}(x_t), i.e. both
// oracles evaluated on the time-t context.
int switching_count(std::span<const Vector> thetas,
                    std::span<const FeatureSet> features);

// Successive parameter distances ||theta_{j+1} - theta_j||, length T-1.
std::vector<double> path_increments(std::span<const Vector> thetas);

// V_{t,W} = sum_{j = t-W}^{t-1} ||theta_{j+1} - theta_j|| (0-based t, indices
// clipped at 0).
double local_variation(std::span<const double> increments, int t, int window);

// -(1/H) sum (r*_t - r_t) over expected rewards.
double nmr(std::span<const double> chosen, std::span<const double> optimal);

// Least-squares slope of log(values) against log(horizons).
double slope_fit(std::span<const double> horizons, std::span<const double> values);

double mean(std::span<const double> xs);
// Standard error of the mean (sample sd / sqrt(n)); 0 for n < 2.
double sem(std::span<const double> xs);

}  // namespace evodpo
