#include "matchforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "matchforge/errors.hpp"
#include "matchforge/logistic.hpp"
#include "matchforge/random.hpp"

namespace matchforge {

void SynthConfig::validate() const {
  if (n_samples < 4) throw Error("synthetic tasks need at least 4 samples");
  if (n_features < 1) throw Error("synthetic tasks need at least one feature");
  if (n_confounders > n_features) throw Error("n_confounders exceeds n_features");
  if (!(noise_sd >= 0.0) || !std::isfinite(effect_scale) || !std::isfinite(selection_intercept) ||
      !std::isfinite(selection_scale))
    throw Error("invalid synthetic generator parameters");
}

std::vector<std::size_t> FeatureRoles::selection() const {
  auto out = confounders;
  out.insert(out.end(), selection_only.begin(), selection_only.end());
  return out;
}

std::vector<std::size_t> FeatureRoles::outcome() const {
  auto out = confounders;
  out.insert(out.end(), outcome_only.begin(), outcome_only.end());
  return out;
}

std::array<std::size_t, 5> FeatureRoles::outcome_slots() const {
  const auto o = outcome();
  if (o.empty()) throw Error("no outcome features");
  std::array<std::size_t, 5> slots{};
  for (std::size_t i = 0; i < 5; ++i) slots[i] = o[i % o.size()];
  return slots;
}

FeatureRoles assign_roles(std::size_t n_features, std::size_t n_confounders) {
  if (n_confounders > n_features) throw Error("n_confounders exceeds n_features");
  FeatureRoles r;
  const std::size_t rest = n_features - n_confounders;
  const std::size_t sel = rest / 2;  // remainder goes to outcome
  for (std::size_t j = 0; j < n_features; ++j) {
    if (j < n_confounders) r.confounders.push_back(j);
    else if (j < n_confounders + sel) r.selection_only.push_back(j);
    else r.outcome_only.push_back(j);
  }
  return r;
}

SynthTask generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_samples;
  const std::size_t d = cfg.n_features;
  FeatureRoles roles = assign_roles(d, cfg.n_confounders);
  const auto sel = roles.selection();
  const auto [a, b, c, dd, e] = roles.outcome_slots();
  const double w = sel.empty() ? 0.0 : cfg.selection_scale / std::sqrt(static_cast<double>(sel.size()));

  std::vector<ColumnSchema> columns;
  for (std::size_t j = 0; j < d; ++j) columns.push_back({"x" + std::to_string(j), ColumnKind::continuous});
  columns.push_back({"treatment", ColumnKind::treatment});
  columns.push_back({"outcome", ColumnKind::outcome});

  // Separate streams so that changing one part of the model does not reshuffle
  // the others.
  Rng feature_rng = make_rng(cfg.seed, {0x78});
  Rng treat_rng = make_rng(cfg.seed, {0x74});
  Rng noise_rng = make_rng(cfg.seed, {0x79});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthTask task{Dataset(columns, {}), {}, 0.0, {}, roles, w, cfg};
  std::vector<Cell> cells;
  cells.reserve(n * (d + 2));
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = normal(feature_rng);
    double score = cfg.selection_intercept;
    for (auto j : sel) score += w * x[j];
    const double p = sigmoid(score);
    const int t = unif(treat_rng) < p ? 1 : 0;
    const double base = std::max({x[a] + x[b], x[c], 0.0}) + std::max(x[dd] + x[e], 0.0);
    const double tau = cfg.effect_scale * (x[a] + std::log1p(std::exp(x[b])));
    const double y = base + t * tau + cfg.noise_sd * normal(noise_rng);
    for (double v : x) cells.push_back(Cell::numeric(v));
    cells.push_back(Cell::numeric(t));
    cells.push_back(Cell::numeric(y));
    task.true_ite.push_back(tau);
    task.propensity.push_back(p);
  }
  task.dataset = Dataset(std::move(columns), std::move(cells));
  task.true_ate = std::accumulate(task.true_ite.begin(), task.true_ite.end(), 0.0) / static_cast<double>(n);
  return task;
}

double oracle_error(const SynthTask& task, double estimated_ate) {
  const double diff = estimated_ate - task.true_ate;
  return diff * diff;
}

std::pair<std::filesystem::path, std::filesystem::path> export_task(const SynthTask& task,
                                                                    const std::filesystem::path& dir,
                                                                    const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto csv = dir / (stem + ".csv");
  const auto schema = dir / (stem + ".schema.json");
  write_csv(task.dataset, csv);
  write_schema(task.dataset.columns(), schema);
  return {csv, schema};
}

}  // namespace matchforge
