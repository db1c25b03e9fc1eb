#include "matchforge/pipeline.hpp"

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

std::vector<double> gather(std::span<const double> values, std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = values[rows[i]];
  return out;
}

std::span<const double> outcomes(const DesignMatrix& m) {
  return {m.outcome.data(), static_cast<std::size_t>(m.outcome.size())};
}

}  // namespace

std::string PipelineSpec::id() const {
  std::string s(to_string(propensity.model));
  if (propensity.model == ModelKind::rf) s += std::to_string(propensity.rf_trees);
  s += propensity.use_logit_link ? "/logit/" : "/raw/";
  s += to_string(matcher);
  return s;
}

MatchOutcome match_and_measure(const DesignMatrix& m, std::span<const double> matching_value,
                               MatchMethod matcher, const BalanceOptions& balance) {
  if (matching_value.size() != m.rows()) throw Error("matching values do not cover every sample");
  const ArmSplit arms = split_by_treatment(m);
  MatchOutcome out;
  out.treated_is_small = arms.treated.size() <= arms.control.size();
  const auto& large = out.treated_is_small ? arms.control : arms.treated;
  const auto& small = out.treated_is_small ? arms.treated : arms.control;
  out.match = match(matcher, gather(matching_value, large), gather(matching_value, small));
  const MatchedPopulations matched = extract_matched(m, large, small, out.match);
  const DesignMatrix& control = out.treated_is_small ? matched.large : matched.small;
  const DesignMatrix& treated = out.treated_is_small ? matched.small : matched.large;
  out.ate = ate(outcomes(control), outcomes(treated));
  out.balance = balance_report(control.raw, treated.raw, balance);
  return out;
}

PipelineOutcome run_spec(const DesignMatrix& m, const PipelineSpec& spec, const BalanceOptions& balance) {
  PipelineOutcome out;
  out.fit = fit_propensity(m, spec.propensity);
  out.matched = match_and_measure(m, out.fit.matching_value, spec.matcher, balance);
  return out;
}

TaskSummary summarize_task(const DesignMatrix& m, const BalanceOptions& balance) {
  const ArmSplit arms = split_by_treatment(m);
  TaskSummary s;
  s.n_control = arms.control.size();
  s.n_treated = arms.treated.size();
  const auto y = outcomes(m);
  s.ate = ate(gather(y, arms.control), gather(y, arms.treated));
  s.balance = balance_report(m.raw.subset(arms.control), m.raw.subset(arms.treated), balance);
  return s;
}

}  // namespace matchforge
