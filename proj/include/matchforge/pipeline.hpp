#pragma once

#include <span>
#include <string>

#include "matchforge/matching.hpp"
#include "matchforge/metrics.hpp"
#include "matchforge/propensity.hpp"
#include "matchforge/tabular.hpp"

namespace matchforge {

// One propensity-score-matching pipeline: propensity model (with link) and
// matcher.
struct PipelineSpec {
  PropensityConfig propensity;
  MatchMethod matcher = MatchMethod::optimal;

  // e.g. "clr/logit/nearest"; rf carries its tree count ("rf100/raw/optimal").
  std::string id() const;
};

struct MatchOutcome {
  MatchResult match;
  bool treated_is_small = true;
  double ate = 0.0;  // mean(matched treated) - mean(matched control)
  BalanceReport balance;
};

struct PipelineOutcome {
  PropensityFit fit;
  MatchOutcome matched;
};

// Matches the smaller arm into the larger one on the given per-sample
// matching values and measures the matched ATE and covariate balance.
MatchOutcome match_and_measure(const DesignMatrix& m, std::span<const double> matching_value,
                               MatchMethod matcher, const BalanceOptions& balance = {});

PipelineOutcome run_spec(const DesignMatrix& m, const PipelineSpec& spec, const BalanceOptions& balance = {});

// Unadjusted ATE and balance of the two arms as given.
struct TaskSummary {
  std::size_t n_control = 0;
  std::size_t n_treated = 0;
  double ate = 0.0;  // mean(treated) - mean(control)
  BalanceReport balance;
};

TaskSummary summarize_task(const DesignMatrix& m, const BalanceOptions& balance = {});

}  // namespace matchforge
