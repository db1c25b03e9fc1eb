#include "matchforge/logistic.hpp"

#include <cmath>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

// log(1 + exp(z)) without overflow.
double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double objective(const Eigen::VectorXd& eta, const Eigen::VectorXd& beta, std::span<const int> y,
                 std::span<const double> w, double ridge) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    f += w[k] * (log1pexp(eta(i)) - y[k] * eta(i));
  }
  return f + 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace

double LogisticModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return sigmoid(intercept + x.dot(coef));
}

std::vector<double> LogisticModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd eta = (x * coef).array() + intercept;
  std::vector<double> p(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[static_cast<std::size_t>(i)] = sigmoid(eta(i));
  return p;
}

std::vector<double> balanced_weights(std::span<const int> y) {
  double n1 = 0;
  for (int v : y) n1 += v != 0;
  const double n = static_cast<double>(y.size());
  const double n0 = n - n1;
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = n / (2.0 * (y[i] ? n1 : n0));
  return w;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y,
                           std::span<const double> weights, const LogisticOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols() + 1;
  if (static_cast<std::size_t>(n) != y.size() || y.size() != weights.size())
    throw Error("fit_logistic: size mismatch");
  if (n == 0) throw Error("fit_logistic: no samples");

  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = x;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, opts.ridge);
  penalty(0) = 0.0;
  double f = objective(eta, beta, y, weights, opts.ridge);

  for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
    Eigen::VectorXd grad = penalty.cwiseProduct(beta);
    Eigen::VectorXd curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double mu = sigmoid(eta(i));
      grad += weights[k] * (mu - y[k]) * design.row(i).transpose();
      curvature(i) = weights[k] * mu * (1.0 - mu);
    }
    Eigen::MatrixXd hessian = design.transpose() * curvature.asDiagonal() * design;
    hessian.diagonal() += penalty;
    // Keeps the system solvable when every sample sits in a saturated tail.
    hessian.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hessian.ldlt().solve(grad);

    double t = 1.0;
    bool improved = false;
    Eigen::VectorXd next;
    Eigen::VectorXd next_eta;
    double next_f = f;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      next = beta - t * step;
      next_eta = design * next;
      next_f = objective(next_eta, next, y, weights, opts.ridge);
      if (next_f <= f) {
        improved = true;
        break;
      }
    }
    const double scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
    if (!improved || (t * step).cwiseAbs().maxCoeff() <= opts.tolerance * scale) {
      if (improved) {
        beta = next;
      }
      LogisticModel m;
      m.intercept = beta(0);
      m.coef = beta.tail(p - 1);
      m.iterations = iter;
      return m;
    }
    beta = std::move(next);
    eta = std::move(next_eta);
    f = next_f;
  }
  throw ConvergenceError("logistic regression did not converge", opts.max_iterations);
}

}  // namespace matchforge
