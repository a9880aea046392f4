#include <cmath>

#include "doctest.h"
#include "evodpo/env.hpp"
#include "evodpo/errors.hpp"

using namespace evodpo;

TEST_CASE("advance_theta keeps unit norm and respects zero drift") {
  Rng rng(1);
  const Vector theta = rng.unit_vector(5);
  CHECK(advance_theta(theta, drift_between(0.0, 0.0), rng) == theta);
  for (int i = 0; i < 200; ++i) {
    const Vector next = advance_theta(theta, drift_between(0.1 * i, 0.1 * i + 5.0), rng);
    CHECK(std::abs(next.norm() - 1.0) < 1e-12);
  }
  DriftConfig frozen;
  frozen.mode = DriftMode::kFrozen;
  CHECK(advance_theta(theta, frozen, rng) == theta);
  CHECK(advance_theta(theta, DriftConfig{}, rng, 0.0) == theta);
  CHECK_THROWS_AS(advance_theta(2.0 * theta, DriftConfig{}, rng), ContractError);
}

TEST_CASE("drift config rejects inverted limits") {
  CHECK_THROWS_AS(drift_between(2.0, 1.0).validate(), ContractError);
  CHECK_THROWS_AS(drift_between(-1.0, 1.0).validate(), ContractError);
}

TEST_CASE("theta path total variation accounting") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const double budget = seed % 2 == 0 ? 8000.0 : 7.5;
    const ThetaPath path = make_theta_path(2000, 5, DriftConfig{}, budget, rng);
    REQUIRE(path.size() == 2000);
    double recount = 0.0;
    for (std::size_t t = 1; t < path.size(); ++t) {
      CHECK(std::abs(path.thetas[t].norm() - 1.0) < 1e-12);
      recount += (path.thetas[t] - path.thetas[t - 1]).norm();
    }
    CHECK(std::abs(recount - path.tv_used) < 1e-9);
    CHECK(path.tv_used <= path.tv_budget);
    CHECK(path.tv_used <= 2.0 * 2000);
  }
}

TEST_CASE("theta path freezes for good once the budget runs out") {
  Rng rng(3);
  const ThetaPath path = make_theta_path(500, 3, DriftConfig{}, 5.0, rng);
  CHECK(path.exhausted);
  std::size_t last_move = 0;
  for (std::size_t t = 1; t < path.size(); ++t) {
    if (path.thetas[t] != path.thetas[t - 1]) last_move = t;
  }
  for (std::size_t t = last_move + 1; t < path.size(); ++t) CHECK(path.thetas[t] == path.thetas[last_move]);
}

TEST_CASE("drift interval moves theta only on scheduled steps") {
  Rng rng(4);
  const ThetaPath path = make_theta_path(100, 4, drift_between(1.0, 5.0, 25), 1e9, rng);
  for (std::size_t t = 1; t < path.size(); ++t) {
    const bool moved = path.thetas[t] != path.thetas[t - 1];
    CHECK(moved == (t % 25 == 0));
  }
}

TEST_CASE("utility is the inner product") {
  Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
  e1[0] = 1.0;
  e2[1] = 1.0;
  CHECK(utility(e1, e1) == 1.0);
  CHECK(utility(e1, e2) == 0.0);
  CHECK_THROWS_AS(utility(e1, Vector::Zero(2)), ContractError);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Vector a = rng.unit_vector(7), b = rng.unit_vector(7);
    double naive = 0.0;
    for (int k = 0; k < 7; ++k) naive += a[k] * b[k];
    CHECK(std::abs(utility(a, b) - naive) < 1e-12);
  }
}

TEST_CASE("sample_preference probabilities") {
  Rng rng(2);
  Vector theta = Vector::Zero(2);
  theta[0] = 1.0;
  Vector a = Vector::Zero(2), b = Vector::Zero(2);
  CHECK(sample_preference(theta, a, b, rng).probability_used == 0.5);
  a[0] = 20.0;
  CHECK(sample_preference(theta, a, b, rng).probability_used > 1.0 - 1e-8);

  a[0] = 1.0;
  const int n = 100000;
  int wins = 0;
  for (int i = 0; i < n; ++i) wins += sample_preference(theta, a, b, rng).winner_is_first;
  const double p = sigmoid(1.0);
  CHECK(std::abs(p - 0.7310585786300049) < 1e-15);
  CHECK(std::abs(wins / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));

  for (int i = 0; i < 100; ++i) {
    const Vector t = rng.unit_vector(4), x = rng.unit_vector(4), y = rng.unit_vector(4);
    const double forward = sample_preference(t, x, y, rng).probability_used;
    const double backward = sample_preference(t, y, x, rng).probability_used;
    CHECK(std::abs(forward + backward - 1.0) < 1e-12);
  }
}

TEST_CASE("make_features shape, norms and determinism") {
  Rng rng(5);
  const FeatureSet fs = make_features(5, 5, rng);
  CHECK(fs.arms() == 5);
  CHECK(fs.dim() == 5);
  for (int a = 0; a < 5; ++a) CHECK(std::abs(fs.rows.row(a).norm() - 1.0) < 1e-12);
  Rng r1(6), r2(6);
  CHECK(make_features(5, 5, r1).rows == make_features(5, 5, r2).rows);
  const FeatureSet line = make_features(4, 1, rng);
  for (int a = 0; a < 4; ++a) CHECK(std::abs(std::abs(line.rows(a, 0)) - 1.0) < 1e-15);
  CHECK_THROWS_AS(make_features(1, 3, rng), ContractError);
  CHECK_THROWS_AS(make_features(3, 0, rng), ContractError);
}

TEST_CASE("sample_reward noise") {
  Rng rng(12);
  const Vector theta = rng.unit_vector(3), phi = rng.unit_vector(3);
  CHECK(sample_reward(theta, phi, rng, 0.0) == utility(theta, phi));
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_reward(theta, phi, rng);
  CHECK(std::abs(s / n - utility(theta, phi)) < 3.0 / std::sqrt(double(n)));

  Vector e1 = Vector::Zero(2), e2 = Vector::Zero(2);
  e1[0] = 1.0;
  e2[1] = 1.0;
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = sample_reward(e1, e2, rng);
    m += r;
    m2 += r * r;
  }
  const double var = m2 / n - (m / n) * (m / n);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("context tables") {
  Rng rng(14);
  const ContextTable fresh = make_contexts(ContextMode::kFresh, 10, 3, 2, rng);
  CHECK(fresh.size() == 10);
  CHECK(fresh.context_at(7) == 7);
  const ContextTable fixed = make_contexts(ContextMode::kFixed, 10, 3, 2, rng);
  CHECK(fixed.size() == 1);
  CHECK(fixed.context_at(7) == 0);
  const Vector theta = rng.unit_vector(2);
  const Matrix table = utility_table(theta, fresh);
  for (int x = 0; x < 10; ++x) {
    for (int a = 0; a < 3; ++a) CHECK(table(x, a) == fresh.sets[x].rows.row(a).dot(theta));
  }
}
