#include "evodpo/regret.hpp"

#include <cmath>

#include "evodpo/errors.hpp"

namespace evodpo {

void RegretLedger::append(int t, int phase, const RegretTerms& terms,
                          int oracle_arm, bool switched) {
  LedgerRow row;
  row.t = t;
  row.phase = phase;
  row.bias = terms.bias;
  row.error = terms.error;
  row.regret_step = terms.regret;
  row.regret_cum = cumulative() + terms.regret;
  row.oracle_arm = oracle_arm;
  row.switched = switched;
  bias_total_ += terms.bias;
  error_total_ += terms.error;
  if (switched) ++switches_;
  rows_.push_back(row);
}

int oracle_action(const Vector& utilities) {
  if (utilities.size() == 0) throw ContractError("oracle_action: no arms");
  int best = 0;
  for (int a = 1; a < utilities.size(); ++a) {
    if (utilities[a] > utilities[best]) best = a;
  }
  return best;
}

int oracle_action(const Vector& theta, const FeatureSet& features) {
  return oracle_action(utilities(theta, features));
}

Vector one_hot(int arms, int arm) {
  Vector v = Vector::Zero(arms);
  v[arm] = 1.0;
  return v;
}

RegretTerms regret_decompose(const Vector& u, const Vector& pi_star,
                             const Vector& pi_kl, const Vector& pi) {
  const double j_star = pi_star.dot(u);
  const double j_kl = pi_kl.dot(u);
  const double j_pi = pi.dot(u);
  RegretTerms out;
  out.bias = j_star - j_kl;
  out.error = j_kl - j_pi;
  out.regret = out.bias + out.error;
  return out;
}

int switching_count(std::span<const Vector> thetas,
                    std::span<const FeatureSet> features) {
  if (thetas.size() != features.size()) {
    throw ContractError("switching_count: theta and feature paths differ in length");
  }
  int count = 0;
  for (std::size_t t = 1; t < thetas.size(); ++t) {
    if (oracle_action(thetas[t], features[t]) !=
        oracle_action(thetas[t - 1], features[t])) {
      ++count;
    }
  }
  return count;
}

std::vector<double> path_increments(std::span<const Vector> thetas) {
  std::vector<double> out;
  if (thetas.size() < 2) return out;
  out.reserve(thetas.size() - 1);
  for (std::size_t j = 0; j + 1 < thetas.size(); ++j) {
    out.push_back((thetas[j + 1] - thetas[j]).norm());
  }
  return out;
}

double local_variation(std::span<const double> increments, int t, int window) {
  if (window < 1) throw ContractError("local_variation: window must be >= 1");
  double sum = 0.0;
  for (int j = std::max(0, t - window); j <= t - 1; ++j) {
    sum += increments[static_cast<std::size_t>(j)];
  }
  return sum;
}

double nmr(std::span<const double> chosen, std::span<const double> optimal) {
  if (chosen.size() != optimal.size()) throw ContractError("nmr: length mismatch");
  if (chosen.empty()) throw ContractError("nmr: horizon must be >= 1");
  double gap = 0.0;
  for (std::size_t t = 0; t < chosen.size(); ++t) gap += optimal[t] - chosen[t];
  return -gap / static_cast<double>(chosen.size());
}

double slope_fit(std::span<const double> horizons, std::span<const double> values) {
  if (horizons.size() != values.size()) throw ContractError("slope_fit: length mismatch");
  if (horizons.size() < 3) throw ContractError("slope_fit: need at least 3 points");
  const std::size_t n = horizons.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(horizons[i] > 0.0) || !(values[i] > 0.0)) {
      throw ContractError("slope_fit: horizons and values must be positive");
    }
    lx[i] = std::log(horizons[i]);
    ly[i] = std::log(values[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw ContractError("slope_fit: horizons must not all be equal");
  return sxy / sxx;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sem(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double n = static_cast<double>(xs.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

}  // namespace evodpo
