#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace evodpo {

// Precondition on an operation's input was not met (non-unit theta, bad
// dimensions, empty sets where one element is required, out-of-range knobs).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A reference policy entry fell below the support floor, so KL and log-ratios
// are not finite.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An iterative solver hit its cap before the stopping tolerance. Carries the
// last iterate so callers can inspect how far off it was.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                   double residual)
      : std::runtime_error(what),
        last_iterate_(std::move(last_iterate)),
        residual_(residual) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

}  // namespace evodpo
