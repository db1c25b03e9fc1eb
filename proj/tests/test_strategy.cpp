#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "matchforge/errors.hpp"
#include "matchforge/strategy.hpp"

using namespace matchforge;

namespace {

CandidateEvaluation cand(std::string id, double smd, double a2a, double ate = 0.0) {
  CandidateEvaluation c;
  c.pipeline_id = std::move(id);
  c.smd = smd;
  c.a2a = a2a;
  c.ate = ate;
  c.smd_valid = smd < 0.10;
  return c;
}

std::vector<CandidateEvaluation> random_candidates(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> smd(0.0, 0.12), a2a(0.0, 0.3), ate(-1, 1);
  std::vector<CandidateEvaluation> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(cand("p" + std::to_string(10 + i), smd(rng), a2a(rng), ate(rng)));
  return out;
}

// Sweep in smd order keeping a running a2a minimum; values are distinct.
std::vector<std::string> pareto_oracle(std::vector<CandidateEvaluation> c) {
  c.erase(std::remove_if(c.begin(), c.end(), [](const auto& x) { return !(x.smd < 0.10); }), c.end());
  std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.smd < b.smd; });
  std::vector<std::string> front;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : c) {
    if (x.a2a < best) {
      front.push_back(x.pipeline_id);
      best = x.a2a;
    }
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace

TEST(Threshold, Examples) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.05, 0.1), cand("b", 0.12, 0.1)};
  const auto r = select_smd_threshold(c);
  EXPECT_EQ(r.selected, (std::vector<std::string>{"a"}));
  EXPECT_EQ(r.ate_range, 0.0);
  const std::vector<CandidateEvaluation> bad = {cand("a", 0.2, 0.1), cand("b", 0.10, 0.1)};
  const auto e = select_smd_threshold(bad);
  EXPECT_TRUE(e.selected.empty());
  EXPECT_FALSE(e.notice.empty());
}

TEST(Threshold, OverlapInvalidExcludedAndRangeComputed) {
  std::vector<CandidateEvaluation> c = {cand("b", 0.01, 0.1, 0.5), cand("a", 0.02, 0.1, -0.25),
                                        cand("c", 0.03, 0.1, 3.0)};
  c[2].overlap_valid = false;
  const auto r = select_smd_threshold(c);
  EXPECT_EQ(r.selected, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(r.selected_ates, (std::vector<double>{-0.25, 0.5}));
  EXPECT_DOUBLE_EQ(r.ate_range, 0.75);
}

TEST(Threshold, ApplyMarksStrictly) {
  std::vector<CandidateEvaluation> c = {cand("a", 0.10, 0), cand("b", 0.0999, 0)};
  apply_threshold(c, 0.10);
  EXPECT_FALSE(c[0].smd_valid);
  EXPECT_TRUE(c[1].smd_valid);
}

TEST(MinA2A, Examples) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.05, 0.03), cand("b", 0.05, 0.01)};
  EXPECT_EQ(select_min_a2a(c).selected, (std::vector<std::string>{"b"}));
  // The best A2A is SMD-invalid and skipped.
  const std::vector<CandidateEvaluation> d = {cand("a", 0.15, 0.001), cand("b", 0.05, 0.02), cand("c", 0.06, 0.04)};
  EXPECT_EQ(select_min_a2a(d).selected, (std::vector<std::string>{"b"}));
  const std::vector<CandidateEvaluation> one = {cand("only", 0.02, 0.2)};
  EXPECT_EQ(select_min_a2a(one).selected, (std::vector<std::string>{"only"}));
  EXPECT_EQ(select_min_smd(one).selected, (std::vector<std::string>{"only"}));
}

TEST(MinSmd, TiesGoToSmallestId) {
  const std::vector<CandidateEvaluation> c = {cand("z", 0.02, 0.1), cand("m", 0.02, 0.2), cand("q", 0.05, 0.0)};
  EXPECT_EQ(select_min_smd(c).selected, (std::vector<std::string>{"m"}));
}

TEST(Singletons, NoValidCandidateThrows) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.2, 0.1)};
  EXPECT_THROW(select_min_a2a(c), NoSelectionError);
  EXPECT_THROW(select_min_smd(c), NoSelectionError);
  EXPECT_THROW(select_smd_x_a2a(c), NoSelectionError);
  EXPECT_THROW(select_pareto(c), NoSelectionError);
}

TEST(Dbscan, TwoGroups) {
  const std::vector<Point2> p = {{0, 0}, {0.01, 0}, {1, 1}, {0.99, 1}};
  const auto l = dbscan(p, 0.1, 2);
  EXPECT_EQ(l, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Dbscan, SinglePointIsItsOwnCluster) {
  const std::vector<Point2> p = {{0.3, 0.4}};
  EXPECT_EQ(dbscan(p, 0.1, 1), (std::vector<int>{0}));
  EXPECT_EQ(dbscan(p, 0.1, 2), (std::vector<int>{-1}));
}

TEST(Dbscan, HugeEpsJoinsEverything) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point2> p(10);
  for (auto& q : p) q = {u(rng), u(rng)};
  const auto l = dbscan(p, std::numeric_limits<double>::infinity(), 2);
  for (int v : l) EXPECT_EQ(v, 0);
}

TEST(Dbscan, BorderPointJoinsButDoesNotExpand) {
  // 1-D chain after normalisation: 0, 0.1, 0.2, 1.0 with eps 0.15, min_pts 3.
  const std::vector<Point2> p = {{0, 0}, {0.1, 0}, {0.2, 0}, {1.0, 0}};
  const auto l = dbscan(p, 0.15, 3);
  EXPECT_EQ(l, (std::vector<int>{0, 0, 0, -1}));
}

TEST(SmdXA2A, AllCloseSelectsAll) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.01, 0.10), cand("b", 0.02, 0.11), cand("c", 0.015, 0.105)};
  StrategyParams p;
  p.eps = 2.0;  // wider than the normalised unit square diagonal
  EXPECT_EQ(select_smd_x_a2a(c, p).selected.size(), 3u);
}

TEST(SmdXA2A, IsolatedBestIsSingleton) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.01, 0.10), cand("b", 0.011, 0.10), cand("c", 0.09, 0.001)};
  EXPECT_EQ(select_smd_x_a2a(c).selected, (std::vector<std::string>{"c"}));
}

TEST(SmdXA2A, BestInSmallerClusterReturnsThatCluster) {
  // Normalised: A = (0, .9), (.125, .9), (.0625, 1); B = (.875, 0), (1, .02).
  // Pairwise gaps inside A are <= .125 and inside B .127; across > .8.
  const std::vector<CandidateEvaluation> c = {cand("a1", 0.01, 0.10), cand("a2", 0.02, 0.10), cand("a3", 0.015, 0.11),
                                              cand("b1", 0.08, 0.01), cand("b2", 0.09, 0.012)};
  const auto r = select_smd_x_a2a(c);
  EXPECT_EQ(r.selected, (std::vector<std::string>{"b1", "b2"}));
}

TEST(Pareto, Examples) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.05, 0.03), cand("b", 0.04, 0.05), cand("c", 0.06, 0.06)};
  EXPECT_EQ(select_pareto(c).selected, (std::vector<std::string>{"a", "b"}));
  const std::vector<CandidateEvaluation> one = {cand("a", 0.05, 0.03)};
  EXPECT_EQ(select_pareto(one).selected.size(), 1u);
  const std::vector<CandidateEvaluation> same = {cand("a", 0.05, 0.03), cand("b", 0.05, 0.03), cand("c", 0.05, 0.03)};
  EXPECT_EQ(select_pareto(same).selected.size(), 3u);
}

TEST(Pareto, MatchesSweepOracleAndContainsArgmins) {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 200; ++rep) {
    const auto c = random_candidates(rng, 2 + rep % 12);
    const bool any_valid = std::any_of(c.begin(), c.end(), [](const auto& x) { return x.smd < 0.10; });
    if (!any_valid) continue;
    const auto front = select_pareto(c).selected;
    EXPECT_EQ(front, pareto_oracle(c));
    const std::string a2a = select_min_a2a(c).selected[0];
    const std::string smd = select_min_smd(c).selected[0];
    EXPECT_TRUE(std::find(front.begin(), front.end(), a2a) != front.end());
    EXPECT_TRUE(std::find(front.begin(), front.end(), smd) != front.end());
    const auto cluster = select_smd_x_a2a(c).selected;
    EXPECT_TRUE(std::find(cluster.begin(), cluster.end(), a2a) != cluster.end());
  }
}

TEST(ApplyAll, FiveBlocksAndNotices) {
  const std::vector<CandidateEvaluation> c = {cand("a", 0.05, 0.03), cand("b", 0.04, 0.05)};
  const auto all = apply_all(c);
  ASSERT_EQ(all.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(all[i].strategy, kAllStrategies[i]);
    EXPECT_FALSE(all[i].selected.empty());
  }
  const std::vector<CandidateEvaluation> bad = {cand("a", 0.5, 0.03)};
  for (const auto& r : apply_all(bad)) {
    EXPECT_TRUE(r.selected.empty());
    EXPECT_FALSE(r.notice.empty());
  }
  for (const auto& r : apply_all({})) EXPECT_TRUE(r.selected.empty());
}

TEST(Names, Strategies) {
  EXPECT_EQ(to_string(Strategy::smd_x_a2a), "smd_x_a2a");
  EXPECT_EQ(to_string(Strategy::pareto), "pareto");
}
