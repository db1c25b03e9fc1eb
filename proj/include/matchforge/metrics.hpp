#pragma once

#include <span>
#include <string>
#include <vector>

#include "matchforge/tabular.hpp"

namespace matchforge {

// mean(y1) - mean(y0).
double ate(std::span<const double> y0, std::span<const double> y1);

// (mean0 - mean1) / pooled standard deviation, sample variances with N-1.
// Zero pooled deviation gives 0 when the means agree and throws
// InfiniteEffectError otherwise.
double cohens_d(std::span<const double> x0, std::span<const double> x1);

// Cramér's V of the 2 x c contingency table (population x level), no
// continuity correction. Codes are non-negative level indices; levels absent
// from both populations do not count towards c.
double cramers_v(std::span<const int> x0, std::span<const int> x1);

enum class SmdAggregate { mean, max };

std::string_view to_string(SmdAggregate a);
SmdAggregate parse_smd_aggregate(std::string_view text);

struct BalanceOptions {
  SmdAggregate aggregate = SmdAggregate::mean;
  double threshold = 0.10;
};

enum class SmdKind { cohens_d, cramers_v };

struct FeatureBalance {
  std::string feature;
  double smd = 0.0;
  SmdKind kind = SmdKind::cohens_d;
};

struct BalanceReport {
  std::vector<FeatureBalance> per_feature;
  double aggregate = 0.0;  // mean of |smd|
  double max_abs = 0.0;
  bool valid = true;

  double scalar(SmdAggregate a) const { return a == SmdAggregate::mean ? aggregate : max_abs; }
};

// Cohen's D per continuous column, Cramér's V per categorical column (on
// level codes, not one-hot indicators). Validity compares the configured
// scalar against the threshold with strict `<`.
BalanceReport balance_report(const Covariates& x0, const Covariates& x1,
                             const BalanceOptions& opts = {});

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;
};

// Tau-b with tie correction; two-sided p-value from the normal approximation
// with tie-corrected variance. Throws UndefinedTauError when either input is
// constant.
KendallResult kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace matchforge
