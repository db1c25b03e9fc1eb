#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matchforge/a2a.hpp"
#include "matchforge/metrics.hpp"
#include "matchforge/pipeline.hpp"
#include "matchforge/propensity.hpp"
#include "matchforge/strategy.hpp"
#include "matchforge/synth.hpp"

namespace matchforge {

struct CandidateSpec {
  ModelKind model = ModelKind::lr;
  bool use_logit_link = false;
  MatchMethod matcher = MatchMethod::optimal;

  // "lr/raw/optimal"; rf ids gain the selected tree count in reports.
  std::string id() const;
};

// {lr, clr, rf} x {raw, logit} x {nearest, optimal}.
std::vector<CandidateSpec> default_candidates();

struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path schema;
  std::optional<SynthConfig> synth;  // used instead of data/schema when set
  std::vector<CandidateSpec> candidates = default_candidates();
  std::vector<std::size_t> rf_trees_grid{50, 100};  // chosen per link by CV composite
  std::size_t rf_min_leaf = 5;
  std::size_t cv_folds = 5;
  std::size_t n_bootstraps = 100;
  std::size_t max_iters = 20000;
  std::size_t patience = 2000;
  std::uint64_t seed = 0;
  BalanceOptions balance;
  StrategyParams strategy;
  std::size_t workers = 0;  // 0: default_worker_count()
  std::filesystem::path output_dir;  // empty: nothing written

  void validate() const;
};

enum class CandidateStatus { ok, fit_failed, matching_failed, a2a_failed };

std::string_view to_string(CandidateStatus s);

struct CandidateReport {
  CandidateSpec spec;
  std::string pipeline_id;  // PipelineSpec::id of the fitted pipeline
  PipelineSpec pipeline;
  CandidateStatus status = CandidateStatus::ok;
  std::string error;
  DiagnosticScores cv;        // fold means of the held-out diagnostics
  std::vector<DiagnosticScores> cv_folds;
  DiagnosticScores full_fit;  // diagnostics of the final fit on all samples
  std::size_t n_pairs = 0;
  // Matched (control row, treated row) pairs, as rows of the input dataset.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double matched_ate = 0.0;
  BalanceReport balance;
  A2AResult a2a;
  CandidateEvaluation evaluation;
  bool strategy_input = false;  // ok and overlap-valid
};

struct RunReport {
  std::string task_name;
  std::uint64_t seed = 0;
  std::uint64_t a2a_seed = 0;
  std::size_t n_bootstraps = 0;
  SmdAggregate aggregate = SmdAggregate::mean;
  StrategyParams strategy_params;
  std::vector<std::string> rf_grid_notes;
  std::vector<std::string> warnings;
  TaskSummary summary;
  ReferenceTargets reference;
  std::optional<double> true_ate;
  std::optional<SynthTask> synth;  // generator details for synthetic runs
  std::vector<CandidateReport> candidates;
  std::vector<SelectionResult> selections;

  // 0 all candidates ok, 2 some failed, 3 all failed.
  int exit_code() const;
};

// Runs every candidate on an already loaded dataset.
RunReport evaluate_task(const Dataset& data, const RunConfig& cfg, const std::string& task_name,
                        std::optional<double> true_ate = std::nullopt);

// Loads (or generates) the task, evaluates it and writes the report files when
// cfg.output_dir is set.
RunReport run_pipeline(const RunConfig& cfg);

// Mean squared error against true_ate of the selected candidates; nullopt for
// an empty selection.
std::optional<double> selection_mse(const SelectionResult& s, double true_ate);

struct SuiteConfig {
  SynthConfig base;
  std::vector<std::size_t> k_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::uint64_t> seeds{0};
  RunConfig run;  // data/schema/synth ignored
};

struct SuiteRun {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  RunReport report;
};

// One run per (k, seed), k-major.
std::vector<SuiteRun> run_synthetic_suite(const SuiteConfig& cfg);

struct ConfounderRow {
  std::size_t k = 0;
  std::size_t runs = 0;
  // Per strategy (kAllStrategies order): range averaged over seeds, and the
  // MSE averaged over seeds with a non-empty selection (NaN when none).
  std::array<double, 5> ate_range{};
  std::array<double, 5> mse{};
  std::array<std::size_t, 5> empty_selections{};
  // Fraction of overlap-invalid CV fits, by link (raw, logit), over models and seeds.
  std::array<double, 2> invalid_fraction{};
};

std::vector<ConfounderRow> confounder_table(const std::vector<SuiteRun>& runs);

struct CorrelationCell {
  double mean_tau = 0.0;
  double sd_tau = 0.0;
  double mean_p = 0.0;
  std::size_t count = 0;  // rankings the cell averages over
};

struct CorrelationRow {
  std::size_t k = 0;
  CorrelationCell correction;    // SMD vs |unadjusted ATE - matched ATE|
  CorrelationCell ground_truth;  // SMD vs |matched ATE| (true effect is zero)
  CorrelationCell random;        // SMD vs a seeded random ranking
  std::size_t skipped = 0;       // bootstraps with < 3 candidates or constant rankings
};

// Per bootstrap artificial task, Kendall tau across the strategy-input
// candidates.
std::vector<CorrelationRow> correlation_table(const std::vector<SuiteRun>& runs);

}  // namespace matchforge
