#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "matchforge/forest.hpp"
#include "matchforge/logistic.hpp"
#include "matchforge/tabular.hpp"

namespace matchforge {

enum class ModelKind { lr, clr, rf };

std::string_view to_string(ModelKind m);
ModelKind parse_model_kind(std::string_view text);

struct ClipBounds {
  double low = 0.05;
  double high = 0.95;
};

struct PropensityConfig {
  ModelKind model = ModelKind::lr;
  bool use_logit_link = false;
  ClipBounds clip;
  std::size_t rf_trees = 100;
  std::size_t rf_min_leaf = 5;
  std::size_t rf_max_depth = 0;  // 0: grow to purity / min leaf
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;

  // Throws Error unless 0 < low < high < 1, cv_folds >= 2, rf_trees >= 1.
  void validate() const;
  // Short label such as "rf100+logit".
  std::string label() const;
};

struct DiagnosticScores {
  double accuracy = 0.0;        // [0, 2]
  double extremes_ratio = 0.0;  // [0, 1]
  double overlap = 0.0;         // [0, 1]
  double composite = 0.0;       // accuracy + (1 - extremes_ratio) + overlap
  bool valid = false;           // overlap >= 0.5
};

struct ChunkedLogisticModel {
  std::vector<LogisticModel> chunks;
};

struct PlattForest {
  RandomForest forest;
  LogisticModel platt;  // 1-D calibration on vote fractions
};

// A fitted propensity model that can score new samples.
struct PropensityModel {
  std::variant<LogisticModel, ChunkedLogisticModel, PlattForest> model;

  std::vector<double> predict(const Eigen::MatrixXd& features) const;
};

struct PropensityFit {
  std::vector<double> probabilities;   // P(T=1|x), before clipping
  std::vector<double> clipped;         // clamped to the clip bounds
  std::vector<double> matching_value;  // clipped, or logit(clipped)
  DiagnosticScores diagnostics;
  PropensityModel model;
};

// Accuracy = recall(controls, PS < 0.5) + recall(treated, PS >= 0.5).
double accuracy_score(std::span<const double> scores, std::span<const int> treatment);

// Fraction of scores outside the closed interval [0.05, 0.95].
double extremes_ratio(std::span<const double> scores);

// Sum over the nine 0.1-wide strata centred on 0.1..0.9 of
// min(share of scores0 in stratum, share of scores1 in stratum). Strata are
// half-open except the last, which is closed at 0.95; scores outside
// [0.05, 0.95] fall in no stratum.
double overlap_coefficient(std::span<const double> scores0, std::span<const double> scores1);

// Values the pipeline treats as propensities: raw probabilities, or
// logit(clipped probability) under the logit link.
std::vector<double> diagnostic_values(std::span<const double> probabilities, const PropensityConfig& cfg);

DiagnosticScores diagnose(std::span<const double> values, std::span<const int> treatment);

std::vector<double> clip_and_transform(std::span<const double> scores, const PropensityConfig& cfg);

PropensityFit fit_lr(const DesignMatrix& m, const PropensityConfig& cfg);
PropensityFit fit_clr(const DesignMatrix& m, const PropensityConfig& cfg);
PropensityFit fit_rf(const DesignMatrix& m, const PropensityConfig& cfg);
PropensityFit fit_propensity(const DesignMatrix& m, const PropensityConfig& cfg);

// Fills clipped / matching_value / diagnostics from probabilities.
PropensityFit finalize_fit(std::vector<double> probabilities, PropensityModel model,
                           std::span<const int> treatment, const PropensityConfig& cfg);

// Number and sizes of chunks the larger arm is cut into.
std::vector<std::size_t> clr_chunk_sizes(std::size_t n_large, std::size_t n_small);

// Stratified fold id per sample (0..folds-1), seeded.
std::vector<std::size_t> stratified_folds(std::span<const int> treatment, std::size_t folds, std::uint64_t seed);

struct CandidateDiagnostics {
  std::vector<DiagnosticScores> folds;
  DiagnosticScores mean;  // fold means; valid from the mean overlap
  bool fit_failed = false;
  std::string error;
};

struct ModelSelection {
  std::size_t best = 0;
  PropensityConfig best_config;
  std::vector<CandidateDiagnostics> candidates;
};

// Stratified k-fold CV of every candidate, scored on the held-out folds;
// returns the argmax of the mean composite (first wins ties). Folds depend on
// the first candidate's seed and cv_folds only. Throws NoModelError when every
// candidate fails.
ModelSelection select_model(const DesignMatrix& m, std::span<const PropensityConfig> candidates);

}  // namespace matchforge
