#include "matchforge/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sum of t(t-1)(...) over tie groups of a sorted copy.
struct TieSums {
  double v = 0.0;   // sum t(t-1)
  double v1 = 0.0;  // sum t(t-1)(2t+5)
  double v2 = 0.0;  // sum t(t-1)(t-2)
};

TieSums tie_sums(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  TieSums out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double t = static_cast<double>(j - i);
    out.v += t * (t - 1);
    out.v1 += t * (t - 1) * (2 * t + 5);
    out.v2 += t * (t - 1) * (t - 2);
    i = j;
  }
  return out;
}

}  // namespace

double ate(std::span<const double> y0, std::span<const double> y1) {
  if (y0.empty() || y1.empty()) throw Error("ate needs two non-empty outcome vectors");
  return mean_of(y1) - mean_of(y0);
}

double cohens_d(std::span<const double> x0, std::span<const double> x1) {
  const double n0 = static_cast<double>(x0.size());
  const double n1 = static_cast<double>(x1.size());
  if (x0.empty() || x1.empty() || n0 + n1 < 3)
    throw Error("cohens_d needs non-empty populations with at least 3 samples in total");
  const double m0 = mean_of(x0);
  const double m1 = mean_of(x1);
  double ss0 = 0.0, ss1 = 0.0;
  for (double v : x0) ss0 += (v - m0) * (v - m0);
  for (double v : x1) ss1 += (v - m1) * (v - m1);
  // (N-1) * sigma^2 is the centered sum of squares.
  const double pooled = std::sqrt((ss0 + ss1) / (n0 + n1 - 2));
  if (pooled == 0.0) {
    if (m0 == m1) return 0.0;
    throw InfiniteEffectError("zero pooled deviation with distinct means");
  }
  return (m0 - m1) / pooled;
}

double cramers_v(std::span<const int> x0, std::span<const int> x1) {
  if (x0.empty() || x1.empty()) throw Error("cramers_v needs two non-empty populations");
  std::map<int, std::array<double, 2>> table;
  for (int v : x0) table[v][0] += 1;
  for (int v : x1) table[v][1] += 1;
  const std::size_t c = table.size();
  if (c < 2) return 0.0;
  const double n0 = static_cast<double>(x0.size());
  const double n1 = static_cast<double>(x1.size());
  const double n = n0 + n1;
  double chi2 = 0.0;
  for (const auto& [level, counts] : table) {
    const double col = counts[0] + counts[1];
    const double e0 = n0 * col / n;
    const double e1 = n1 * col / n;
    if (e0 > 0) chi2 += (counts[0] - e0) * (counts[0] - e0) / e0;
    if (e1 > 0) chi2 += (counts[1] - e1) * (counts[1] - e1) / e1;
  }
  // r = 2 populations, so min(c - 1, r - 1) = 1.
  const double k = std::min<double>(static_cast<double>(c) - 1, 1.0);
  return std::min(1.0, std::sqrt(chi2 / (n * k)));
}

std::string_view to_string(SmdAggregate a) { return a == SmdAggregate::mean ? "mean" : "max"; }

SmdAggregate parse_smd_aggregate(std::string_view text) {
  if (text == "mean") return SmdAggregate::mean;
  if (text == "max") return SmdAggregate::max;
  throw Error("SMD aggregate must be 'mean' or 'max'");
}

BalanceReport balance_report(const Covariates& x0, const Covariates& x1, const BalanceOptions& opts) {
  BalanceReport report;
  std::vector<double> a, b;
  for (Eigen::Index j = 0; j < x0.continuous.cols(); ++j) {
    a.assign(x0.continuous.col(j).data(), x0.continuous.col(j).data() + x0.continuous.rows());
    b.assign(x1.continuous.col(j).data(), x1.continuous.col(j).data() + x1.continuous.rows());
    report.per_feature.push_back(
        {x0.continuous_names[static_cast<std::size_t>(j)], cohens_d(a, b), SmdKind::cohens_d});
  }
  std::vector<int> ca, cb;
  for (Eigen::Index j = 0; j < x0.categorical.cols(); ++j) {
    ca.assign(x0.categorical.col(j).data(), x0.categorical.col(j).data() + x0.categorical.rows());
    cb.assign(x1.categorical.col(j).data(), x1.categorical.col(j).data() + x1.categorical.rows());
    report.per_feature.push_back(
        {x0.categorical_names[static_cast<std::size_t>(j)], cramers_v(ca, cb), SmdKind::cramers_v});
  }
  double sum = 0.0;
  for (const auto& f : report.per_feature) {
    sum += std::abs(f.smd);
    report.max_abs = std::max(report.max_abs, std::abs(f.smd));
  }
  report.aggregate = report.per_feature.empty() ? 0.0 : sum / static_cast<double>(report.per_feature.size());
  report.valid = report.scalar(opts.aggregate) < opts.threshold;
  return report;
}

KendallResult kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("kendall_tau needs equal lengths >= 2");
  const std::size_t n = a.size();
  // O(n^2) pair scan; inputs are candidate rankings (tens of entries).
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      const double sign = (da > 0) - (da < 0);
      s += sign * ((db > 0) - (db < 0));
    }
  }
  const TieSums ta = tie_sums(a);
  const TieSums tb = tie_sums(b);
  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1) / 2;
  const double n1 = ta.v / 2;
  const double n2 = tb.v / 2;
  if (n0 == n1 || n0 == n2) throw UndefinedTauError("kendall_tau of a constant ranking");
  KendallResult r;
  r.tau = s / std::sqrt((n0 - n1) * (n0 - n2));

  const double v0 = nd * (nd - 1) * (2 * nd + 5);
  double var_s = (v0 - ta.v1 - tb.v1) / 18.0 + ta.v * tb.v / (2.0 * nd * (nd - 1));
  if (n > 2) var_s += ta.v2 * tb.v2 / (9.0 * nd * (nd - 1) * (nd - 2));
  const double z = s / std::sqrt(var_s);
  r.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  return r;
}

}  // namespace matchforge
