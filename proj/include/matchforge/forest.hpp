#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace matchforge {

struct ForestOptions {
  std::size_t trees = 100;
  std::size_t max_features = 0;  // 0: floor(sqrt(p)), at least 1
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0: unlimited
  std::uint64_t seed = 0;
};

// Binary random forest: bootstrap-sampled CART trees with Gini splits. A
// tree's output is the treated fraction of its leaf; the forest averages
// trees.
class RandomForest {
 public:
  static RandomForest fit(const Eigen::MatrixXd& x, std::span<const int> y, const ForestOptions& opts);

  double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;

  // Per training sample, the average over trees that did not see it; samples
  // in every bootstrap fall back to the full forest.
  const std::vector<double>& out_of_bag() const noexcept { return oob_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }
  std::size_t leaf_count(std::size_t tree) const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  static double evaluate(const Tree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& x);

  std::vector<Tree> trees_;
  std::vector<double> oob_;
};

}  // namespace matchforge
