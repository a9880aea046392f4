#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "evodpo/env.hpp"
#include "evodpo/errors.hpp"
#include "evodpo/policy.hpp"

using namespace evodpo;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_simplex(int k, Rng& rng) {
  Vector w(k);
  for (int i = 0; i < k; ++i) w[i] = -std::log(1.0 - rng.uniform());
  return w / w.sum();
}

double regularized_value(const Vector& pi, const Vector& ref, const Vector& u, double beta) {
  double kl_sum = 0.0;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    if (pi[i] > 0.0) kl_sum += pi[i] * std::log(pi[i] / ref[i]);
  }
  return pi.dot(u) - beta * kl_sum;
}

}  // namespace

TEST_CASE("floor_and_normalize keeps unclamped ratios") {
  const Vector out = floor_and_normalize(vec({1.0, 1e-15, 3.0}), 1e-9);
  CHECK(out[1] == 1e-9);
  CHECK(std::abs(out.sum() - 1.0) < 1e-15);
  CHECK(std::abs(out[2] / out[0] - 3.0) < 1e-14);
  CHECK_THROWS_AS(floor_and_normalize(vec({0.0, 0.0}), 1e-9), ContractError);
  CHECK_THROWS_AS(floor_and_normalize(vec({1.0, -1.0}), 1e-9), ContractError);
}

TEST_CASE("gibbs closed form") {
  const Vector ref = vec({0.2, 0.3, 0.5});
  const Vector same = gibbs(ref, vec({4.0, 4.0, 4.0}), 0.3);
  CHECK((same - ref).cwiseAbs().maxCoeff() < 1e-15);

  const double z = 0.5 * 3.0 + 0.5 * 1.0;
  const Vector tilted = gibbs(vec({0.5, 0.5}), vec({std::log(3.0), 0.0}), 1.0);
  CHECK(std::abs(tilted[0] - 0.5 * 3.0 / z) < 1e-15);
  CHECK(std::abs(tilted[1] - 0.5 / z) < 1e-15);
  CHECK(std::abs(tilted[0] - 0.75) < 1e-15);

  CHECK(total_variation(gibbs(vec({0.5, 0.5}), vec({1.0, 0.0}), 1e6), vec({0.5, 0.5})) < 1e-5);
  CHECK_THROWS_AS(gibbs(ref, vec({0.0, 0.0, 0.0}), 0.0), ContractError);
}

TEST_CASE("gibbs survives extreme temperatures and keeps the floor") {
  const Vector out = gibbs(vec({0.25, 0.25, 0.25, 0.25}), vec({1.0, 0.0, -1.0, 0.5}), 1e-4);
  CHECK(out.minCoeff() >= kDefaultSupportFloor);
  CHECK(std::abs(out.sum() - 1.0) < 1e-12);
  Eigen::Index top = 0;
  out.maxCoeff(&top);
  CHECK(top == 0);
}

TEST_CASE("gibbs is the maximizer of value minus beta KL") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 5;
    const Vector ref = random_simplex(k, rng);
    Vector u(k);
    for (int i = 0; i < k; ++i) u[i] = rng.uniform(-1.0, 1.0);
    const double beta = rng.uniform(0.05, 2.0);
    const Vector best = gibbs(ref, u, beta, 1e-300);
    const double top = regularized_value(best, ref, u, beta);
    for (int j = 0; j < 100; ++j) {
      Vector other = best + 0.05 * (random_simplex(k, rng) - best);
      other /= other.sum();
      CHECK(regularized_value(other, ref, u, beta) <= top + 1e-10);
    }
  }
}

TEST_CASE("kl values") {
  const Vector p = vec({0.3, 0.7});
  CHECK(kl(p, p) == 0.0);
  CHECK(std::abs(kl(vec({1.0, 0.0}), vec({0.5, 0.5})) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(kl(vec({0.75, 0.25}), vec({0.5, 0.5})) - 0.13081203594113697) < 1e-15);
  CHECK_THROWS_AS(kl(p, vec({1.0, 0.0})), SupportError);
}

TEST_CASE("Pinsker inequality on random pairs") {
  Rng rng(32);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 6;
    const Vector p = floor_and_normalize(random_simplex(k, rng));
    const Vector q = floor_and_normalize(random_simplex(k, rng));
    if ((p - q).cwiseAbs().sum() > std::sqrt(2.0 * kl(p, q))) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("KL between tilts is bounded by the parameter gap") {
  Rng rng(33);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const FeatureSet fs = make_features(4, 3, rng);
    const Vector theta = rng.unit_vector(3);
    const Vector theta_hat = theta + rng.uniform() * rng.unit_vector(3);
    const Vector ref = floor_and_normalize(random_simplex(4, rng));
    const double beta = rng.uniform(0.5, 2.0);
    const double lhs = kl(gibbs(ref, fs.rows * theta, beta), gibbs(ref, fs.rows * theta_hat, beta));
    const double rhs = (theta - theta_hat).squaredNorm() / (2.0 * beta * beta);
    if (lhs > rhs) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("value") {
  CHECK(value(vec({1.0, 0.0}), vec({2.5, -1.0})) == 2.5);
  CHECK(value(vec({0.5, 0.5}), vec({1.0, 3.0})) == 2.0);
  Rng rng(34);
  for (int i = 0; i < 100; ++i) {
    const Vector p = random_simplex(6, rng);
    Vector u(6);
    double naive = 0.0;
    for (int a = 0; a < 6; ++a) {
      u[a] = rng.normal();
      naive += p[a] * u[a];
    }
    CHECK(std::abs(value(p, u) - naive) < 1e-12);
  }
}

TEST_CASE("categorical policy rows respect the floor") {
  Rng rng(35);
  Matrix table(10, 4);
  for (int x = 0; x < 10; ++x) {
    for (int a = 0; a < 4; ++a) table(x, a) = a == x % 4 ? 1.0 : 0.0;
  }
  const CategoricalPolicy pi(table);
  for (int x = 0; x < 10; ++x) {
    CHECK(pi.row(x).minCoeff() >= pi.support_floor());
    CHECK(std::abs(pi.row(x).sum() - 1.0) < 1e-12);
  }
  const CategoricalPolicy u = CategoricalPolicy::uniform(3, 5);
  CHECK(u.prob(2, 4) == doctest::Approx(0.2));
}

TEST_CASE("gate subsets") {
  Rng rng(36);
  const std::vector<int> pool{5, 3, 3, 9, 11, 5, 2};
  const GateSubset g = sample_gate_subset(pool, 32, rng);
  CHECK(g.size() == 5);
  const GateSubset h = sample_gate_subset(pool, 3, rng);
  CHECK(h.size() == 3);
  const std::set<int> unique(h.contexts.begin(), h.contexts.end());
  CHECK(unique.size() == 3);
  for (int x : h.contexts) CHECK(std::find(pool.begin(), pool.end(), x) != pool.end());
  CHECK_THROWS_AS(sample_gate_subset(pool, 0, rng), ContractError);
}

TEST_CASE("gate statistics") {
  Rng rng(37);
  const int contexts = 64;
  Matrix a(contexts, 5), b(contexts, 5), u(contexts, 5);
  for (int x = 0; x < contexts; ++x) {
    a.row(x) = random_simplex(5, rng).transpose();
    b.row(x) = random_simplex(5, rng).transpose();
    for (int k = 0; k < 5; ++k) u(x, k) = rng.normal();
  }
  const CategoricalPolicy pi(a), ref(b);
  std::vector<int> all(contexts);
  for (int x = 0; x < contexts; ++x) all[x] = x;
  const GateSubset g = sample_gate_subset(all, 32, rng);
  REQUIRE(g.size() == 32);

  CHECK(gate_kl_estimate(ref, ref, g) == 0.0);
  const GateSubset single{{g.contexts[0]}};
  CHECK(gate_kl_estimate(pi, ref, single) == kl(pi.row(g.contexts[0]), ref.row(g.contexts[0])));

  double kl_sum = 0.0, score_sum = 0.0;
  for (int x : g.contexts) {
    kl_sum += kl(pi.row(x), ref.row(x));
    score_sum += value(pi.row(x), u.row(x).transpose());
  }
  CHECK(std::abs(gate_kl_estimate(pi, ref, g) - kl_sum / 32.0) < 1e-12);
  CHECK(std::abs(inspector_score(pi, g, u) - score_sum / 32.0) < 1e-12);
  CHECK(inspector_score(ref, g, u) - inspector_score(ref, g, u) == 0.0);

  Matrix greedy = Matrix::Zero(1, 3);
  greedy(0, 1) = 1.0;
  Matrix one_u(1, 3);
  one_u << 0.2, 0.9, -0.4;
  CHECK(inspector_score(CategoricalPolicy(greedy, 1e-300), GateSubset{{0}}, one_u) ==
        doctest::Approx(0.9).epsilon(1e-12));
  CHECK_THROWS_AS(inspector_score(pi, GateSubset{}, u), ContractError);
  CHECK_THROWS_AS(gate_kl_estimate(pi, ref, GateSubset{}), ContractError);
}
