#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace matchforge {

struct LogisticOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;
  double ridge = 1e-6;  // L2 penalty on the slopes, not the intercept
};

struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  std::size_t iterations = 0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Weighted binary logistic regression by damped Newton steps. Throws
// ConvergenceError when the step size has not settled after max_iterations.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y,
                           std::span<const double> weights, const LogisticOptions& opts = {});

// Weights giving each class the same total weight (n / (2 * n_class)).
std::vector<double> balanced_weights(std::span<const int> y);

}  // namespace matchforge
