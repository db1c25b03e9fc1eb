#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "matchforge/errors.hpp"
#include "matchforge/matching.hpp"

using namespace matchforge;

namespace {

// Minimum over all injective maps small -> large, by recursion.
double brute_force(const std::vector<double>& large, const std::vector<double>& small) {
  std::vector<bool> used(large.size(), false);
  double best = INFINITY;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double acc) {
    if (acc >= best) return;
    if (i == small.size()) {
      best = acc;
      return;
    }
    for (std::size_t j = 0; j < large.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      rec(i + 1, acc + std::abs(large[j] - small[i]));
      used[j] = false;
    }
  };
  rec(0, 0.0);
  return best;
}

void expect_valid(const MatchResult& r, std::size_t n_large, std::size_t n_small) {
  ASSERT_EQ(r.pairs.size(), n_small);
  std::set<std::size_t> larges, smalls;
  for (const auto& p : r.pairs) {
    EXPECT_LT(p.large, n_large);
    larges.insert(p.large);
    smalls.insert(p.small);
  }
  EXPECT_EQ(larges.size(), n_small);
  EXPECT_EQ(smalls.size(), n_small);
}

}  // namespace

TEST(Nearest, TieGoesToLowerIndex) {
  const auto r = match_nearest(std::vector<double>{0.4, 0.6}, std::vector<double>{0.5});
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].large, 0u);
  const auto s = match_nearest(std::vector<double>{0.6, 0.4}, std::vector<double>{0.5});
  EXPECT_EQ(s.pairs[0].large, 0u);
}

TEST(Nearest, HandTrace) {
  const auto r = match_nearest(std::vector<double>{0.85, 0.15, 0.5}, std::vector<double>{0.9, 0.1});
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (MatchPair{0, 0}));
  EXPECT_EQ(r.pairs[1], (MatchPair{1, 1}));
  EXPECT_NEAR(r.total_distance, 0.1, 1e-12);
}

TEST(Nearest, DescendingOrderMatters) {
  // 0.9 goes first and takes 0.8; 0.7 then has to settle for 0.1.
  const auto r = match_nearest(std::vector<double>{0.8, 0.1}, std::vector<double>{0.7, 0.9});
  EXPECT_EQ(r.pairs[0], (MatchPair{1, 0}));
  EXPECT_EQ(r.pairs[1], (MatchPair{0, 1}));
}

TEST(Matchers, IdenticalMultisetsMatchPerfectly) {
  const std::vector<double> v = {0.3, 0.1, 0.7, 0.1};
  const std::vector<double> w = {0.1, 0.7, 0.1, 0.3};
  EXPECT_EQ(match_nearest(v, w).total_distance, 0.0);
  EXPECT_EQ(match_optimal(v, w).total_distance, 0.0);
}

TEST(Optimal, SingleSample) {
  const auto r = match_optimal(std::vector<double>{0.2}, std::vector<double>{0.9});
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0], (MatchPair{0, 0}));
  EXPECT_NEAR(r.total_distance, 0.7, 1e-12);
}

TEST(Optimal, HandEnumeratedInstance) {
  const std::vector<double> large = {0.5, 0.11, 0.89}, small = {0.1, 0.9};
  const auto r = match_optimal(large, small);
  EXPECT_EQ(r.pairs[0], (MatchPair{1, 0}));
  EXPECT_EQ(r.pairs[1], (MatchPair{2, 1}));
  EXPECT_NEAR(r.total_distance, 0.02, 1e-12);
  EXPECT_NEAR(match_nearest(large, small).total_distance, 0.02, 1e-12);
}

TEST(Optimal, BeatsGreedy) {
  // Greedy from 0.9 takes 0.8 and leaves 0.7 with 0.1 (cost 0.7); optimal
  // pays 0.1 + 0.1.
  const std::vector<double> large = {0.8, 0.1, 0.95}, small = {0.7, 0.9};
  const auto opt = match_optimal(large, small);
  EXPECT_NEAR(opt.total_distance, brute_force(large, small), 1e-12);
  EXPECT_LE(opt.total_distance, match_nearest(large, small).total_distance);
}

TEST(Optimal, RandomSixByFourMatchesExhaustiveOracle) {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> large(6), small(4);
    for (auto& v : large) v = u(rng);
    for (auto& v : small) v = u(rng);
    const auto r = match_optimal(large, small);
    expect_valid(r, 6, 4);
    EXPECT_NEAR(r.total_distance, brute_force(large, small), 1e-12);
  }
}

TEST(Optimal, DyadicInstancesMatchOracleExactly) {
  // Values on a k/1024 grid make every cost sum exact, so equality is exact.
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> grid(0, 1024);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t ns = 1 + rep % 6;
    const std::size_t nl = ns + rep % (9 - ns);
    std::vector<double> large(nl), small(ns);
    for (auto& v : large) v = grid(rng) / 1024.0;
    for (auto& v : small) v = grid(rng) / 1024.0;
    const auto opt = match_optimal(large, small);
    const auto near = match_nearest(large, small);
    expect_valid(opt, nl, ns);
    expect_valid(near, nl, ns);
    EXPECT_EQ(opt.total_distance, brute_force(large, small));
    EXPECT_GE(near.total_distance, opt.total_distance);
  }
}

TEST(Matchers, PermutationCovariant) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> grid(0, 64);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> large(8), small(5);
    for (auto& v : large) v = grid(rng) / 64.0;
    for (auto& v : small) v = grid(rng) / 64.0;
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(8);
    for (std::size_t i = 0; i < 8; ++i) permuted[perm[i]] = large[i];
    for (auto method : {MatchMethod::nearest, MatchMethod::optimal}) {
      EXPECT_EQ(match(method, large, small).total_distance, match(method, permuted, small).total_distance);
    }
  }
}

TEST(Matchers, PairsSortedBySmallIndex) {
  const auto r = match_optimal(std::vector<double>{0.9, 0.1, 0.5, 0.3}, std::vector<double>{0.4, 0.2, 0.8});
  for (std::size_t i = 0; i < r.pairs.size(); ++i) EXPECT_EQ(r.pairs[i].small, i);
}

TEST(Matchers, RejectsBadSizes) {
  EXPECT_THROW(match_optimal(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}), Error);
  EXPECT_THROW(match_nearest(std::vector<double>{0.1}, std::vector<double>{}), Error);
}

TEST(Matchers, MethodNames) {
  EXPECT_EQ(parse_match_method("optimal"), MatchMethod::optimal);
  EXPECT_EQ(to_string(MatchMethod::nearest), "nearest");
  EXPECT_THROW(parse_match_method("full"), Error);
}

namespace {

DesignMatrix small_design(std::size_t n) {
  DesignMatrix d;
  d.features = Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1);
  d.outcome = Eigen::VectorXd(static_cast<Eigen::Index>(n));
  d.raw.continuous_names = {"x"};
  d.raw.continuous = Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1);
  d.raw.categorical = Eigen::MatrixXi(static_cast<Eigen::Index>(n), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.features(r, 0) = d.raw.continuous(r, 0) = static_cast<double>(i);
    d.outcome(r) = 10.0 * static_cast<double>(i);
    d.treatment.push_back(static_cast<int>(i % 2));
    d.group_index.push_back(i);
  }
  return d;
}

}  // namespace

TEST(Extract, SelfMatchCopiesInputs) {
  const auto d = small_design(4);
  const std::vector<std::size_t> rows = {0, 1, 2, 3};
  MatchResult r;
  for (std::size_t i = 0; i < 4; ++i) r.pairs.push_back({i, i});
  const auto m = extract_matched(d, rows, rows, r);
  EXPECT_EQ(m.large.outcome, d.outcome);
  EXPECT_EQ(m.small.outcome, d.outcome);
}

TEST(Extract, SubPopulationsFollowPairs) {
  const auto d = small_design(8);
  const std::vector<std::size_t> large = {0, 1, 2, 3, 4}, small = {5, 6, 7};
  MatchResult r;
  r.pairs = {{4, 0}, {2, 2}};
  const auto m = extract_matched(d, large, small, r);
  ASSERT_EQ(m.large.rows(), 2u);
  EXPECT_EQ(m.large.outcome(0), 40.0);
  EXPECT_EQ(m.small.outcome(1), 70.0);
}

TEST(Extract, RejectsEmptyAndOutOfRange) {
  const auto d = small_design(4);
  const std::vector<std::size_t> rows = {0, 1};
  MatchResult empty;
  EXPECT_THROW(extract_matched(d, rows, rows, empty), Error);
  MatchResult bad;
  bad.pairs = {{5, 0}};
  EXPECT_THROW(extract_matched(d, rows, rows, bad), Error);
}
