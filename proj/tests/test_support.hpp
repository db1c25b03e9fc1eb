#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "matchforge/tabular.hpp"

namespace matchforge::testing {

// Continuous-only design matrix; raw covariates equal the features.
inline DesignMatrix make_design(const Eigen::MatrixXd& x, const std::vector<int>& t,
                                const Eigen::VectorXd& y = {}) {
  DesignMatrix m;
  m.features = x;
  m.treatment = t;
  m.outcome = y.size() ? y : Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    m.feature_names.push_back("x" + std::to_string(j));
    m.center.push_back(0.0);
    m.scale.push_back(1.0);
  }
  m.raw.continuous_names = m.feature_names;
  m.raw.continuous = x;
  m.raw.categorical = Eigen::MatrixXi(x.rows(), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) m.group_index.push_back(static_cast<std::size_t>(i));
  return m;
}

}  // namespace matchforge::testing
