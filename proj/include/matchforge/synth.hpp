#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matchforge/tabular.hpp"

namespace matchforge {

struct SynthConfig {
  std::size_t n_samples = 3000;
  std::size_t n_features = 10;
  std::size_t n_confounders = 0;
  double effect_scale = 1.0;
  double noise_sd = 1.0;
  // Linear selection score is intercept + scale * sum(x_s) / sqrt(|S|), so it
  // is N(intercept, scale^2). The negative intercept keeps the arms unequal
  // (about a quarter treated), which leaves matching something to discard.
  double selection_intercept = -1.2;
  double selection_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Feature indices by role. Confounders come first, then selection-only, then
// outcome-only features.
struct FeatureRoles {
  std::vector<std::size_t> confounders;
  std::vector<std::size_t> selection_only;
  std::vector<std::size_t> outcome_only;

  std::vector<std::size_t> selection() const;  // confounders + selection_only
  std::vector<std::size_t> outcome() const;    // confounders + outcome_only
  // Indices a..e used by the outcome model, taken cyclically over outcome().
  std::array<std::size_t, 5> outcome_slots() const;
};

FeatureRoles assign_roles(std::size_t n_features, std::size_t n_confounders);

struct SynthTask {
  Dataset dataset;  // columns x0..x{d-1} (continuous), treatment, outcome
  std::vector<double> true_ite;
  double true_ate = 0.0;
  std::vector<double> propensity;  // generator's P(T=1|x)
  FeatureRoles roles;
  double selection_weight = 0.0;  // per selection feature
  SynthConfig config;
};

// X ~ N(0, I); T ~ Bernoulli(sigmoid(selection score));
// b(x) = max(x_a + x_b, x_c, 0) + max(x_d + x_e, 0);
// tau(x) = effect_scale * (x_a + log(1 + exp(x_b)));
// Y = b(x) + T tau(x) + N(0, noise_sd^2).
SynthTask generate(const SynthConfig& cfg);

double oracle_error(const SynthTask& task, double estimated_ate);

// Writes <stem>.csv and <stem>.schema.json into dir; returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> export_task(const SynthTask& task,
                                                                    const std::filesystem::path& dir,
                                                                    const std::string& stem);

}  // namespace matchforge
