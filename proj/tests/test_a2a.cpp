#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "matchforge/a2a.hpp"
#include "matchforge/errors.hpp"
#include "test_support.hpp"

using namespace matchforge;
using matchforge::testing::make_design;

namespace {

Covariates iid_source(std::size_t n, std::size_t d, std::uint64_t seed, std::vector<double>& y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Covariates c;
  c.continuous = Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) c.continuous_names.push_back("x" + std::to_string(j));
  c.categorical = Eigen::MatrixXi(static_cast<Eigen::Index>(n), 0);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) c.continuous(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z(rng);
    y[i] = c.continuous(static_cast<Eigen::Index>(i), 0) + z(rng);
  }
  return c;
}

// Confounded task: x0 drives both assignment and outcome; no treatment effect.
DesignMatrix confounded_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < 3; ++j) x(r, j) = z(rng);
    t[i] = u(rng) < 1.0 / (1.0 + std::exp(-(x(r, 0) - 1.0)));
    y(r) = 2.0 * x(r, 0) + 0.5 * x(r, 1) + z(rng);
  }
  return make_design(x, t, y);
}

// Scores both sides of the task with the pseudo-treated rows: the matched
// populations are identical by construction.
PipelineRun self_matching(const DesignMatrix& task, std::uint64_t) {
  std::vector<double> treated;
  for (std::size_t i = 0; i < task.rows(); ++i)
    if (task.treatment[i]) treated.push_back(task.outcome(static_cast<Eigen::Index>(i)));
  return {ate(treated, treated), 0.0};
}

A2AOptions small_options(std::size_t boots) {
  A2AOptions o;
  o.n_bootstraps = boots;
  o.seed = 42;
  o.max_iters = 2000;
  o.patience = 300;
  return o;
}

}  // namespace

TEST(Loss, Examples) {
  EXPECT_EQ(partition_loss(0.2, 0.1, {0.4, 0.2}), 0.0);
  EXPECT_NEAR(partition_loss(0.3, 0.1, {0.4, 0.2}), 0.01, 1e-15);
  EXPECT_NEAR(partition_loss(0.1, 0.05, {0.4, 0.2}), 0.0125, 1e-15);
}

TEST(Loss, MeasuredFromSource) {
  Covariates c;
  c.continuous_names = {"x"};
  c.continuous = Eigen::MatrixXd(4, 1);
  c.continuous << 0, 1, 1, 2;
  c.categorical = Eigen::MatrixXi(4, 0);
  const std::vector<double> y = {0, 1, 2, 3};
  const std::vector<std::size_t> pc = {0, 1}, pt = {2, 3};
  // ATE 2 and the Cohen's D of {0,1} vs {1,2}, against null targets.
  const double d = std::abs(cohens_d(std::vector<double>{0, 1}, std::vector<double>{1, 2}));
  EXPECT_NEAR(partition_loss(c, y, pc, pt, {0.0, 0.0}), 4.0 + d * d, 1e-12);
  EXPECT_THROW(partition_loss(c, y, {}, pt, {0.0, 0.0}), Error);
}

TEST(Sizes, FollowMembership) {
  EXPECT_EQ(artificial_task_sizes(60, {0.6, 0.4}), (std::array<std::size_t, 2>{36, 24}));
  EXPECT_EQ(artificial_task_sizes(10, {0.5, 0.5}), (std::array<std::size_t, 2>{5, 5}));
  const auto s = artificial_task_sizes(7, {0.3, 0.7});
  EXPECT_EQ(s[0] + s[1], 7u);
}

TEST(HillClimb, ExactSizesAndDisjoint) {
  std::vector<double> y;
  const auto src = iid_source(60, 3, 1, y);
  HillClimbConfig cfg;
  cfg.membership_probs = {0.6, 0.4};
  cfg.max_iters = 500;
  const auto t = build_artificial_task(src, y, {0.4, 0.2}, cfg);
  EXPECT_EQ(t.pseudo_control.size(), 36u);
  EXPECT_EQ(t.pseudo_treated.size(), 24u);
  std::set<std::size_t> all(t.pseudo_control.begin(), t.pseudo_control.end());
  all.insert(t.pseudo_treated.begin(), t.pseudo_treated.end());
  EXPECT_EQ(all.size(), 60u);
  EXPECT_TRUE(std::is_sorted(t.pseudo_control.begin(), t.pseudo_control.end()));
  EXPECT_DOUBLE_EQ(t.target_ate, 0.2);
  EXPECT_DOUBLE_EQ(t.target_smd, 0.1);
}

TEST(HillClimb, ZeroIterationsKeepsInitialPartition) {
  std::vector<double> y;
  const auto src = iid_source(40, 2, 2, y);
  HillClimbConfig cfg;
  cfg.max_iters = 0;
  const auto t = build_artificial_task(src, y, {0.5, 0.3}, cfg);
  EXPECT_EQ(t.iterations, 0u);
  EXPECT_EQ(t.accepted, 0u);
  EXPECT_EQ(t.achieved_loss, t.initial_loss);
  EXPECT_NEAR(t.initial_loss, partition_loss(src, y, t.pseudo_control, t.pseudo_treated, {0.5, 0.3}), 1e-9);
}

TEST(HillClimb, TraceNonIncreasingAndLossMatchesMetrics) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<double> y;
    const auto src = iid_source(80, 3, 100 + seed, y);
    HillClimbConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = 1500;
    cfg.patience = 0;
    cfg.record_trace = true;
    cfg.membership_probs = {0.7, 0.3};
    const ReferenceTargets ref{0.8, 0.4};
    const auto t = build_artificial_task(src, y, ref, cfg);
    ASSERT_EQ(t.loss_trace.size(), t.accepted + 1);
    EXPECT_EQ(t.loss_trace.front(), t.initial_loss);
    for (std::size_t i = 1; i < t.loss_trace.size(); ++i) EXPECT_LT(t.loss_trace[i], t.loss_trace[i - 1]);
    EXPECT_LE(t.achieved_loss, t.initial_loss);
    EXPECT_NEAR(t.achieved_loss, partition_loss(src, y, t.pseudo_control, t.pseudo_treated, ref), 1e-9);
  }
}

TEST(HillClimb, MixedCovariatesLossMatchesMetrics) {
  std::vector<double> y;
  auto src = iid_source(50, 2, 77, y);
  src.categorical_names = {"c"};
  src.categorical_levels = {{"a", "b", "c"}};
  src.categorical = Eigen::MatrixXi(50, 1);
  for (int i = 0; i < 50; ++i) src.categorical(i, 0) = (i * 7) % 3;
  HillClimbConfig cfg;
  cfg.max_iters = 800;
  for (auto agg : {SmdAggregate::mean, SmdAggregate::max}) {
    const ReferenceTargets ref{0.6, 0.5};
    const auto t = build_artificial_task(src, y, ref, cfg, agg);
    EXPECT_NEAR(t.achieved_loss, partition_loss(src, y, t.pseudo_control, t.pseudo_treated, ref, agg), 1e-9);
  }
}

TEST(HillClimb, NullTargetsGiveBalancedSplit) {
  std::vector<double> y;
  const auto src = iid_source(1000, 5, 3, y);
  HillClimbConfig cfg;
  cfg.seed = 3;
  const auto t = build_artificial_task(src, y, {0.0, 0.0}, cfg);
  std::vector<double> y0, y1;
  for (auto i : t.pseudo_control) y0.push_back(y[i]);
  for (auto i : t.pseudo_treated) y1.push_back(y[i]);
  EXPECT_LT(std::abs(ate(y0, y1)), 0.05);
  EXPECT_LT(t.achieved_loss, 1e-3);
}

TEST(HillClimb, SeededRepeat) {
  std::vector<double> y;
  const auto src = iid_source(60, 2, 4, y);
  HillClimbConfig cfg;
  cfg.seed = 8;
  cfg.max_iters = 700;
  const auto a = build_artificial_task(src, y, {0.3, 0.3}, cfg);
  const auto b = build_artificial_task(src, y, {0.3, 0.3}, cfg);
  EXPECT_EQ(a.pseudo_control, b.pseudo_control);
  EXPECT_EQ(a.achieved_loss, b.achieved_loss);
}

TEST(HillClimb, RejectsBadConfig) {
  std::vector<double> y;
  const auto src = iid_source(10, 1, 5, y);
  HillClimbConfig cfg;
  cfg.membership_probs = {0.7, 0.7};
  EXPECT_THROW(build_artificial_task(src, y, {}, cfg), Error);
  const auto tiny = iid_source(3, 1, 5, y);
  EXPECT_THROW(build_artificial_task(tiny, y, {}, HillClimbConfig{}), Error);
}

TEST(Bootstrap, TaskComesFromLargerArm) {
  const auto data = confounded_task(300, 6);
  const auto opts = small_options(1);
  const auto bt = make_bootstrap_task(data, reference_targets(data), 0, opts);
  const auto arms = split_by_treatment(data);
  const auto& large = arms.treated.size() > arms.control.size() ? arms.treated : arms.control;
  const std::set<std::size_t> large_rows(large.begin(), large.end());
  EXPECT_EQ(bt.task.rows(), large.size());
  for (auto g : bt.task.group_index) EXPECT_TRUE(large_rows.count(g));
  // pseudo-control, then pseudo-treated
  EXPECT_TRUE(std::is_sorted(bt.task.treatment.begin(), bt.task.treatment.end()));
}

TEST(A2A, SelfMatchingPipelineScoresZero) {
  const auto data = confounded_task(200, 7);
  const auto r = compute_a2a(data, Pipeline(self_matching), small_options(5));
  EXPECT_EQ(r.mean, 0.0);
  for (double v : r.per_bootstrap) EXPECT_EQ(v, 0.0);
}

TEST(A2A, SingleBootstrapIsItsAbsoluteAte) {
  const auto data = confounded_task(200, 8);
  PipelineSpec spec;
  const auto r = compute_a2a(data, make_pipeline(spec), small_options(1));
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.mean, std::abs(r.records[0].ate));
}

TEST(A2A, FailuresCountedAndUnavailable) {
  const auto data = confounded_task(200, 9);
  Pipeline flaky = [](const DesignMatrix& task, std::uint64_t seed) {
    if (seed % 3 == 0) throw Error("flaky");
    return self_matching(task, seed);
  };
  std::size_t failed = 0;
  try {
    const auto r = compute_a2a(data, flaky, small_options(8));
    failed = r.failures();
    EXPECT_EQ(r.per_bootstrap.size() + failed, 8u);
  } catch (const A2AUnavailableError&) {
    failed = 99;
  }
  EXPECT_GT(failed, 0u);
  Pipeline broken = [](const DesignMatrix&, std::uint64_t) -> PipelineRun { throw Error("broken"); };
  EXPECT_THROW(compute_a2a(data, broken, small_options(3)), A2AUnavailableError);
}

TEST(A2A, BatchedEqualsSinglePipelineRuns) {
  const auto data = confounded_task(240, 10);
  std::vector<PipelineSpec> specs(3);
  specs[1].propensity.use_logit_link = true;
  specs[2].matcher = MatchMethod::nearest;
  const auto opts = small_options(4);
  const auto batched = compute_a2a(data, specs, opts);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto single = compute_a2a(data, make_pipeline(specs[s]), opts);
    EXPECT_EQ(batched[s].per_bootstrap, single.per_bootstrap);
    EXPECT_EQ(batched[s].mean, single.mean);
  }
}

TEST(A2A, WorkerCountDoesNotChangeResults) {
  const auto data = confounded_task(240, 11);
  std::vector<PipelineSpec> specs(2);
  specs[1].propensity.model = ModelKind::rf;
  specs[1].propensity.rf_trees = 20;
  auto opts = small_options(6);
  opts.workers = 1;
  const auto one = compute_a2a(data, specs, opts);
  opts.workers = 3;
  const auto three = compute_a2a(data, specs, opts);
  for (std::size_t s = 0; s < specs.size(); ++s) EXPECT_EQ(one[s].per_bootstrap, three[s].per_bootstrap);
}

TEST(A2A, MatchingReducesArtificialBias) {
  const auto data = confounded_task(1000, 12);
  const auto r = compute_a2a(data, make_pipeline(PipelineSpec{}), small_options(10));
  double unadjusted = 0.0;
  for (const auto& rec : r.records) unadjusted += std::abs(rec.unadjusted_ate) / 10.0;
  EXPECT_LT(r.mean, unadjusted);
  for (double v : r.per_bootstrap) EXPECT_GE(v, 0.0);
}
