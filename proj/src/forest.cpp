#include "matchforge/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "matchforge/errors.hpp"
#include "matchforge/random.hpp"

namespace matchforge {
namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
  std::size_t n_left = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, const ForestOptions& opts, Rng& rng)
      : x_(x), y_(y), opts_(opts), rng_(rng) {
    const auto p = static_cast<std::size_t>(x.cols());
    mtry_ = opts.max_features ? std::min(opts.max_features, p)
                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), 0);
  }

  template <typename Node>
  void grow(std::vector<Node>& tree, std::vector<std::size_t> samples) {
    struct Pending {
      std::int32_t node;
      std::size_t begin, end, depth;
    };
    samples_ = std::move(samples);
    tree.clear();
    tree.push_back(Node{});
    std::vector<Pending> stack{{0, 0, samples_.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      const std::size_t n = job.end - job.begin;
      std::size_t positives = 0;
      for (std::size_t i = job.begin; i < job.end; ++i) positives += y_[samples_[i]] != 0;
      Node& node = tree[static_cast<std::size_t>(job.node)];
      node.value = n ? static_cast<double>(positives) / static_cast<double>(n) : 0.0;
      const bool pure = positives == 0 || positives == n;
      const bool depth_capped = opts_.max_depth && job.depth >= opts_.max_depth;
      if (pure || depth_capped || n < 2 * std::max<std::size_t>(opts_.min_leaf, 1)) continue;

      const Split split = best_split(job.begin, job.end, positives);
      if (split.feature < 0) continue;

      auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                samples_.begin() + static_cast<std::ptrdiff_t>(job.end), [&](std::size_t s) {
                                  return x_(static_cast<Eigen::Index>(s), split.feature) <= split.threshold;
                                });
      const std::size_t cut = static_cast<std::size_t>(mid - samples_.begin());
      const auto left = static_cast<std::int32_t>(tree.size());
      tree.push_back(Node{});
      tree.push_back(Node{});
      Node& parent = tree[static_cast<std::size_t>(job.node)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({left + 1, cut, job.end, job.depth + 1});
      stack.push_back({left, job.begin, cut, job.depth + 1});
    }
  }

 private:
  Split best_split(std::size_t begin, std::size_t end, std::size_t positives) {
    // Partial Fisher-Yates draw of mtry candidate features.
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    const std::size_t n = end - begin;
    const std::size_t min_leaf = std::max<std::size_t>(opts_.min_leaf, 1);
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    scratch_.assign(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                    samples_.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t f = 0; f < mtry_; ++f) {
      const auto feature = static_cast<Eigen::Index>(features_[f]);
      std::sort(scratch_.begin(), scratch_.end(), [&](std::size_t a, std::size_t b) {
        return x_(static_cast<Eigen::Index>(a), feature) < x_(static_cast<Eigen::Index>(b), feature);
      });
      double left_pos = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_pos += y_[scratch_[i - 1]] != 0;
        const double lo = x_(static_cast<Eigen::Index>(scratch_[i - 1]), feature);
        const double hi = x_(static_cast<Eigen::Index>(scratch_[i]), feature);
        if (i < min_leaf || n - i < min_leaf || !(lo < hi)) continue;
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        const double right_pos = static_cast<double>(positives) - left_pos;
        // n_side * gini_side summed over both children.
        const double impurity = nl - (left_pos * left_pos + (nl - left_pos) * (nl - left_pos)) / nl + nr -
                                (right_pos * right_pos + (nr - right_pos) * (nr - right_pos)) / nr;
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = static_cast<int>(feature);
          best.threshold = lo + (hi - lo) / 2;
          if (!(best.threshold < hi)) best.threshold = lo;
          best.n_left = i;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  const ForestOptions& opts_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
  std::vector<std::size_t> scratch_;
};

}  // namespace

RandomForest RandomForest::fit(const Eigen::MatrixXd& x, std::span<const int> y, const ForestOptions& opts) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0 || y.size() != n) throw Error("random forest: bad training data");
  if (opts.trees == 0) throw Error("random forest needs at least one tree");
  if (x.cols() == 0) throw Error("random forest needs at least one feature");

  RandomForest forest;
  forest.trees_.resize(opts.trees);
  std::vector<double> oob_sum(n, 0.0);
  std::vector<std::size_t> oob_count(n, 0);
  std::vector<unsigned char> in_bag(n);
  for (std::size_t t = 0; t < opts.trees; ++t) {
    Rng rng = make_rng(opts.seed, {t});
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> sample(n);
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (auto& s : sample) {
      s = draw(rng);
      in_bag[s] = 1;
    }
    TreeBuilder builder(x, y, opts, rng);
    builder.grow(forest.trees_[t], std::move(sample));
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      oob_sum[i] += evaluate(forest.trees_[t], x.row(static_cast<Eigen::Index>(i)));
      ++oob_count[i];
    }
  }
  forest.oob_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    forest.oob_[i] = oob_count[i] ? oob_sum[i] / static_cast<double>(oob_count[i])
                                  : forest.predict_one(x.row(static_cast<Eigen::Index>(i)));
  }
  return forest;
}

double RandomForest::evaluate(const Tree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  std::size_t node = 0;
  while (tree[node].feature >= 0) {
    node = static_cast<std::size_t>(x(tree[node].feature) <= tree[node].threshold ? tree[node].left
                                                                                    : tree[node].right);
  }
  return tree[node].value;
}

double RandomForest::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += evaluate(t, x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::predict(const Eigen::MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_one(x.row(i));
  return out;
}

std::size_t RandomForest::leaf_count(std::size_t tree) const {
  return static_cast<std::size_t>(
      std::count_if(trees_.at(tree).begin(), trees_.at(tree).end(), [](const Node& n) { return n.feature < 0; }));
}

}  // namespace matchforge
