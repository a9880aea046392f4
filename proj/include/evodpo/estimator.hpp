#pragma once

// Sliding-window estimation: regularized logistic regression on preference
// difference features, ridge regression for the reward bandit, and the
// closed-form estimation-error bound evaluated with realized constants.

#include <cstddef>
#include <deque>

#include <Eigen/Core>

namespace evodpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct WindowEntry {
  Vector feature;  // phi(x, y1) - phi(x, y2) in preference mode
  double label = 0.0;  // 1{y1 preferred}, or the reward in ridge mode
};

// Ring of the most recent `capacity` observations; oldest evicted first.
class WindowBuffer {
 public:
  WindowBuffer(std::size_t capacity, int dim);

  void push(Vector feature, double label);
  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  int dim() const { return dim_; }
  const std::deque<WindowEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  int dim_;
  std::deque<WindowEntry> entries_;
};

struct WindowEstimate {
  Vector theta_hat;
  Matrix covariance;  // sum phi phi^T + lambda I
  double lambda = 0.0;
  double lambda_min_cov = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

inline constexpr double kLogisticTolerance = 1e-8;
inline constexpr int kLogisticMaxIterations = 500;

// argmin sum_tau [log(1 + e^{<theta, phi>}) - p <theta, phi>] + lambda/2 |theta|^2
// by damped Newton, falling back to backtracking gradient descent when a
// Newton step fails to decrease the objective. Throws ConvergenceError if
// the gradient norm is still above tol after the iteration cap.
WindowEstimate fit_logistic_window(const WindowBuffer& buffer, double lambda,
                                   double tol = kLogisticTolerance,
                                   int max_iterations = kLogisticMaxIterations);

// Regularized logistic objective and its gradient; shared with tests.
double logistic_objective(const WindowBuffer& buffer, double lambda,
                          const Vector& theta);
Vector logistic_gradient(const WindowBuffer& buffer, double lambda,
                         const Vector& theta);

struct Covariance {
  Matrix matrix;
  double lambda_min = 0.0;
};

Covariance window_covariance(const WindowBuffer& buffer, double lambda);

// Solves (sum phi phi^T + lambda I) theta = sum r phi.
WindowEstimate ridge_fit(const WindowBuffer& buffer, double lambda);

// Lower bound of sigma(z)(1 - sigma(z)) on |z| <= logit_bound.
double curvature_floor(double logit_bound);

// Right-hand side of the self-normalized bound
//   sqrt(lambda + W phi^2) sqrt(2 (d/2 log(1 + W phi^2 / (d lambda)) + log(1/delta)))
// for a 1-sub-Gaussian noise sequence.
double self_normalized_rhs(double window, double lambda, int dim, double delta,
                           double phi_max);

struct ErrorBoundInputs {
  double local_variation = 0.0;  // V_{t,W}
  double window = 1.0;           // W
  double lambda = 1.0;
  int dim = 1;
  double delta = 0.05;
  double m0 = 0.25;        // curvature floor
  double c = 1.0;          // realized lambda_min(A_t) / W
  double phi_max = 1.0;
  double theta_max = 1.0;
};

struct ErrorBoundTerms {
  double drift = 0.0;           // L_sigma phi^2 V / (m0 c)
  double noise = 0.0;           // self-normalized term / (m0 c W)
  double regularization = 0.0;  // lambda theta_max / (m0 c W)
  double total() const { return drift + noise + regularization; }
};

// Sigmoid Lipschitz constant used by the bound (fixed, not a parameter).
inline constexpr double kSigmoidLipschitz = 0.25;

ErrorBoundTerms estimation_error_terms(const ErrorBoundInputs& in);
double estimation_error_rhs(const ErrorBoundInputs& in);

}  // namespace evodpo
