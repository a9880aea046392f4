#include "evodpo/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "evodpo/env.hpp"
#include "evodpo/errors.hpp"

namespace evodpo {

namespace {

// log(1 + e^z) without overflow.
double log1p_exp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0)) {
    throw ContractError(std::string(name) + " must be positive");
  }
}

}  // namespace

WindowBuffer::WindowBuffer(std::size_t capacity, int dim)
    : capacity_(capacity), dim_(dim) {
  if (capacity == 0) throw ContractError("WindowBuffer: capacity must be >= 1");
  if (dim < 1) throw ContractError("WindowBuffer: dim must be >= 1");
}

void WindowBuffer::push(Vector feature, double label) {
  if (feature.size() != dim_) throw ContractError("WindowBuffer: dimension mismatch");
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back({std::move(feature), label});
}

double logistic_objective(const WindowBuffer& buffer, double lambda,
                          const Vector& theta) {
  double value = 0.5 * lambda * theta.squaredNorm();
  for (const auto& e : buffer.entries()) {
    const double z = theta.dot(e.feature);
    value += log1p_exp(z) - e.label * z;
  }
  return value;
}

Vector logistic_gradient(const WindowBuffer& buffer, double lambda,
                         const Vector& theta) {
  Vector grad = lambda * theta;
  for (const auto& e : buffer.entries()) {
    grad += (sigmoid(theta.dot(e.feature)) - e.label) * e.feature;
  }
  return grad;
}

WindowEstimate fit_logistic_window(const WindowBuffer& buffer, double lambda,
                                   double tol, int max_iterations) {
  require_positive(lambda, "fit_logistic_window: lambda");
  require_positive(tol, "fit_logistic_window: tol");
  const int d = buffer.dim();
  Vector theta = Vector::Zero(d);
  Vector grad = logistic_gradient(buffer, lambda, theta);
  double value = logistic_objective(buffer, lambda, theta);
  int iter = 0;
  for (; iter < max_iterations && grad.norm() > tol; ++iter) {
    Matrix hessian = lambda * Matrix::Identity(d, d);
    for (const auto& e : buffer.entries()) {
      const double s = sigmoid(theta.dot(e.feature));
      hessian.selfadjointView<Eigen::Lower>().rankUpdate(e.feature, s * (1.0 - s));
    }
    hessian = hessian.selfadjointView<Eigen::Lower>();
    Vector direction = -hessian.ldlt().solve(grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      direction = -grad;
      slope = -grad.squaredNorm();
    }
    // Once the predicted Newton decrease is below the resolution of the
    // summed objective, Armijo cannot tell steps apart; the problem is
    // strongly convex, so the full Newton step is taken.
    const double eps = std::numeric_limits<double>::epsilon();
    if (-slope <= 1e3 * eps * (std::abs(value) + 1.0)) {
      theta += direction;
      value = logistic_objective(buffer, lambda, theta);
      grad = logistic_gradient(buffer, lambda, theta);
      continue;
    }
    // Armijo backtracking with a roundoff allowance. A failed Newton search
    // retries along -grad.
    const double roundoff = 8.0 * eps;
    bool moved = false;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      double step = 1.0;
      for (int k = 0; k < 60; ++k) {
        const Vector trial = theta + step * direction;
        const double trial_value = logistic_objective(buffer, lambda, trial);
        if (trial_value <= value + 1e-4 * step * slope + roundoff * std::abs(value)) {
          theta = trial;
          value = trial_value;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        direction = -grad;
        slope = -grad.squaredNorm();
      }
    }
    grad = logistic_gradient(buffer, lambda, theta);
    if (!moved) break;
  }
  if (grad.norm() > tol) {
    throw ConvergenceError("fit_logistic_window: gradient norm " +
                               std::to_string(grad.norm()) +
                               " above tolerance after " +
                               std::to_string(iter) + " iterations",
                           theta, grad.norm());
  }
  const Covariance cov = window_covariance(buffer, lambda);
  WindowEstimate out;
  out.theta_hat = std::move(theta);
  out.covariance = cov.matrix;
  out.lambda = lambda;
  out.lambda_min_cov = cov.lambda_min;
  out.grad_norm = grad.norm();
  out.iterations = iter;
  return out;
}

Covariance window_covariance(const WindowBuffer& buffer, double lambda) {
  require_positive(lambda, "window_covariance: lambda");
  const int d = buffer.dim();
  Matrix a = lambda * Matrix::Identity(d, d);
  for (const auto& e : buffer.entries()) a.noalias() += e.feature * e.feature.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  return {std::move(a), eig.eigenvalues().minCoeff()};
}

WindowEstimate ridge_fit(const WindowBuffer& buffer, double lambda) {
  require_positive(lambda, "ridge_fit: lambda");
  Covariance cov = window_covariance(buffer, lambda);
  Vector b = Vector::Zero(buffer.dim());
  for (const auto& e : buffer.entries()) b += e.label * e.feature;
  WindowEstimate out;
  out.theta_hat = cov.matrix.ldlt().solve(b);
  const double residual = (cov.matrix * out.theta_hat - b).norm();
  if (residual > 1e-8 * std::max(1.0, b.norm())) {
    throw ConvergenceError("ridge_fit: residual " + std::to_string(residual),
                           out.theta_hat, residual);
  }
  out.covariance = std::move(cov.matrix);
  out.lambda = lambda;
  out.lambda_min_cov = cov.lambda_min;
  out.grad_norm = residual;
  return out;
}

double curvature_floor(double logit_bound) {
  const double s = sigmoid(std::abs(logit_bound));
  return s * (1.0 - s);
}

double self_normalized_rhs(double window, double lambda, int dim, double delta,
                           double phi_max) {
  require_positive(window, "self_normalized_rhs: W");
  require_positive(lambda, "self_normalized_rhs: lambda");
  require_positive(phi_max, "self_normalized_rhs: phi_max");
  if (dim < 1) throw ContractError("self_normalized_rhs: d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ContractError("self_normalized_rhs: delta must lie in (0, 1)");
  }
  const double mass = window * phi_max * phi_max;
  const double log_det = 0.5 * dim * std::log1p(mass / (dim * lambda));
  return std::sqrt(lambda + mass) * std::sqrt(2.0 * (log_det + std::log(1.0 / delta)));
}

ErrorBoundTerms estimation_error_terms(const ErrorBoundInputs& in) {
  require_positive(in.m0, "estimation_error_rhs: m0");
  require_positive(in.c, "estimation_error_rhs: c");
  require_positive(in.theta_max, "estimation_error_rhs: theta_max");
  if (in.local_variation < 0.0) {
    throw ContractError("estimation_error_rhs: local variation must be >= 0");
  }
  const double curvature = in.m0 * in.c;
  ErrorBoundTerms terms;
  terms.drift = in.phi_max * in.phi_max * kSigmoidLipschitz *
                in.local_variation / curvature;
  terms.noise = self_normalized_rhs(in.window, in.lambda, in.dim, in.delta,
                                    in.phi_max) /
                (curvature * in.window);
  terms.regularization = in.lambda * in.theta_max / (curvature * in.window);
  return terms;
}

double estimation_error_rhs(const ErrorBoundInputs& in) {
  return estimation_error_terms(in).total();
}

}  // namespace evodpo
