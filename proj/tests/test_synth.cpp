#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "matchforge/errors.hpp"
#include "matchforge/synth.hpp"

using namespace matchforge;

namespace {

double unadjusted_ate(const Dataset& d) {
  double s0 = 0, s1 = 0, n0 = 0, n1 = 0;
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    const double y = d.at(r, d.outcome_column()).number;
    if (d.at(r, d.treatment_column()).number == 1.0) {
      s1 += y;
      n1 += 1;
    } else {
      s0 += y;
      n0 += 1;
    }
  }
  return s1 / n1 - s0 / n0;
}

// The generating process written out again, with its own random stream, to
// estimate E[Y | T=1] - E[Y | T=0] by brute force.
double monte_carlo_naive_difference(const SynthConfig& cfg, const FeatureRoles& roles, std::size_t n) {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> z(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const auto sel = roles.selection();
  const auto slot = roles.outcome_slots();
  const double w = cfg.selection_scale / std::sqrt(static_cast<double>(sel.size()));
  double s0 = 0, s1 = 0, n0 = 0, n1 = 0;
  std::vector<double> x(cfg.n_features);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = z(rng);
    double score = cfg.selection_intercept;
    for (auto j : sel) score += w * x[j];
    const bool t = u(rng) < 1 / (1 + std::exp(-score));
    double y = std::max({x[slot[0]] + x[slot[1]], x[slot[2]], 0.0}) + std::max(x[slot[3]] + x[slot[4]], 0.0) +
               cfg.noise_sd * z(rng);
    if (t) {
      y += cfg.effect_scale * (x[slot[0]] + std::log(1 + std::exp(x[slot[1]])));
      s1 += y;
      n1 += 1;
    } else {
      s0 += y;
      n0 += 1;
    }
  }
  return s1 / n1 - s0 / n0;
}

}  // namespace

TEST(Roles, AssignmentAndDisjointness) {
  const auto r = assign_roles(10, 0);
  EXPECT_TRUE(r.confounders.empty());
  EXPECT_EQ(r.selection_only.size(), 5u);
  EXPECT_EQ(r.outcome_only.size(), 5u);
  const auto s = r.selection(), o = r.outcome();
  for (auto j : s) EXPECT_TRUE(std::find(o.begin(), o.end(), j) == o.end());

  const auto k3 = assign_roles(10, 3);
  EXPECT_EQ(k3.confounders, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(k3.selection_only, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(k3.outcome_only, (std::vector<std::size_t>{6, 7, 8, 9}));

  const auto all = assign_roles(10, 10);
  EXPECT_TRUE(all.selection_only.empty());
  EXPECT_TRUE(all.outcome_only.empty());
  EXPECT_THROW(assign_roles(3, 4), Error);
}

TEST(Roles, SlotsCycleOverOutcomeFeatures) {
  const auto r = assign_roles(4, 1);  // confounder 0, selection 1, outcome 2, 3
  EXPECT_EQ(r.outcome_slots(), (std::array<std::size_t, 5>{0, 2, 3, 0, 2}));
}

TEST(Generate, NullEffect) {
  SynthConfig cfg;
  cfg.n_samples = 500;
  cfg.effect_scale = 0;
  const auto t = generate(cfg);
  EXPECT_EQ(t.true_ate, 0.0);
  for (double v : t.true_ite) EXPECT_EQ(v, 0.0);
}

TEST(Generate, ShapeAndSchema) {
  SynthConfig cfg;
  cfg.n_samples = 200;
  cfg.n_features = 6;
  cfg.n_confounders = 2;
  const auto t = generate(cfg);
  EXPECT_EQ(t.dataset.n_rows(), 200u);
  EXPECT_EQ(t.dataset.n_columns(), 8u);
  EXPECT_EQ(t.dataset.columns()[0].name, "x0");
  EXPECT_EQ(t.dataset.columns()[6].kind, ColumnKind::treatment);
  EXPECT_EQ(t.dataset.columns()[7].kind, ColumnKind::outcome);
  EXPECT_EQ(t.true_ite.size(), 200u);
  EXPECT_NEAR(t.selection_weight, 1.0 / std::sqrt(4.0), 1e-15);
  double mean = 0;
  for (double v : t.true_ite) mean += v / 200.0;
  EXPECT_NEAR(t.true_ate, mean, 1e-12);
}

TEST(Generate, SeedDeterminism) {
  SynthConfig cfg;
  cfg.n_samples = 300;
  cfg.n_confounders = 4;
  cfg.seed = 5;
  const auto a = generate(cfg), b = generate(cfg);
  for (std::size_t r = 0; r < 300; ++r)
    for (std::size_t c = 0; c < a.dataset.n_columns(); ++c) EXPECT_EQ(a.dataset.at(r, c).number, b.dataset.at(r, c).number);
  cfg.seed = 6;
  const auto c = generate(cfg);
  EXPECT_NE(a.dataset.at(0, 0).number, c.dataset.at(0, 0).number);
}

TEST(Generate, NoiseStreamIsSeparate) {
  SynthConfig cfg;
  cfg.n_samples = 100;
  const auto a = generate(cfg);
  cfg.noise_sd = 0.0;
  const auto b = generate(cfg);
  for (std::size_t r = 0; r < 100; ++r) {
    EXPECT_EQ(a.dataset.at(r, 3).number, b.dataset.at(r, 3).number);
    EXPECT_EQ(a.dataset.at(r, 10).number, b.dataset.at(r, 10).number);
  }
}

TEST(Generate, ConfoundingBiasMatchesMonteCarloOracle) {
  SynthConfig cfg;
  cfg.n_features = 10;
  cfg.n_confounders = 5;
  cfg.seed = 2;
  const auto t = generate(cfg);
  const double population = monte_carlo_naive_difference(cfg, t.roles, 1000000);
  const double true_ate_population = [&] {
    SynthConfig big = cfg;
    big.n_samples = 200000;
    return generate(big).true_ate;
  }();
  // Confounding: the naive difference is well away from the true effect.
  EXPECT_GT(std::abs(population - true_ate_population), 0.3);
  // The sampled task agrees with the population value up to sampling error.
  EXPECT_NEAR(unadjusted_ate(t.dataset), population, 0.3);
  EXPECT_GT(std::abs(unadjusted_ate(t.dataset) - t.true_ate), 0.2);
}

TEST(Generate, NoConfoundersNoNoiseIsUnbiased) {
  SynthConfig cfg;
  cfg.n_samples = 100000;
  cfg.n_confounders = 0;
  cfg.noise_sd = 0.0;
  cfg.seed = 9;
  const auto t = generate(cfg);
  EXPECT_LT(std::abs(unadjusted_ate(t.dataset) - t.true_ate), 0.05);
}

TEST(Generate, FewPropensitiesNeedClipping) {
  for (std::size_t k : {0u, 5u, 10u}) {
    SynthConfig cfg;
    cfg.n_samples = 5000;
    cfg.n_confounders = k;
    const auto t = generate(cfg);
    double outside = 0, treated = 0;
    for (double p : t.propensity) outside += (p < 0.05 || p > 0.95);
    for (std::size_t r = 0; r < t.dataset.n_rows(); ++r) treated += t.dataset.at(r, t.dataset.treatment_column()).number;
    EXPECT_LT(outside / 5000, 0.20);
    EXPECT_GT(treated / 5000, 0.15);
    EXPECT_LT(treated / 5000, 0.40);
  }
}

TEST(Generate, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.n_confounders = 11;
  EXPECT_THROW(generate(cfg), Error);
  cfg = {};
  cfg.noise_sd = -1;
  EXPECT_THROW(generate(cfg), Error);
}

TEST(OracleError, Examples) {
  SynthConfig cfg;
  cfg.n_samples = 10;
  SynthTask t = generate(cfg);
  t.true_ate = 0.5;
  EXPECT_EQ(oracle_error(t, 0.5), 0.0);
  EXPECT_NEAR(oracle_error(t, 0.3), 0.04, 1e-15);
  // Averaged over three estimates: (0.01 + 0.04 + 0.09) / 3.
  const double mean = (oracle_error(t, 0.6) + oracle_error(t, 0.3) + oracle_error(t, 0.8)) / 3;
  EXPECT_NEAR(mean, 0.14 / 3, 1e-15);
}

TEST(Export, CsvAndSchemaLoadBack) {
  SynthConfig cfg;
  cfg.n_samples = 50;
  cfg.n_features = 3;
  const auto t = generate(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "matchforge_synth_test";
  const auto [csv, schema] = export_task(t, dir, "task");
  const auto back = load_csv(csv, load_schema(schema));
  ASSERT_EQ(back.n_rows(), 50u);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(back.at(r, c).number, t.dataset.at(r, c).number);
}
