#include "matchforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

using json = nlohmann::ordered_json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json diagnostics_json(const DiagnosticScores& d) {
  return {{"accuracy", number(d.accuracy)},
          {"extremes_ratio", number(d.extremes_ratio)},
          {"overlap", number(d.overlap)},
          {"composite", number(d.composite)},
          {"valid", d.valid}};
}

json balance_json(const BalanceReport& b) {
  json features = json::array();
  for (const auto& f : b.per_feature)
    features.push_back({{"feature", f.feature},
                        {"smd", number(f.smd)},
                        {"kind", f.kind == SmdKind::cohens_d ? "cohens_d" : "cramers_v"}});
  return {{"mean_abs_smd", number(b.aggregate)}, {"max_abs_smd", number(b.max_abs)}, {"per_feature", features}};
}

json candidate_json(const CandidateReport& c) {
  json a2a = {{"mean", number(c.a2a.mean)},
              {"available", c.a2a.available},
              {"failures", c.a2a.failures()},
              {"per_bootstrap", json::array()}};
  for (const auto& rec : c.a2a.records) {
    json r = {{"index", rec.index}, {"ok", rec.ok}};
    if (rec.ok) {
      r["unadjusted_ate"] = number(rec.unadjusted_ate);
      r["ate"] = number(rec.ate);
      r["smd"] = number(rec.smd);
    } else {
      r["error"] = rec.error;
    }
    a2a["per_bootstrap"].push_back(r);
  }
  json out = {{"pipeline_id", c.pipeline_id},
              {"model", to_string(c.spec.model)},
              {"link", c.spec.use_logit_link ? "logit" : "raw"},
              {"matcher", to_string(c.spec.matcher)},
              {"status", to_string(c.status)}};
  if (!c.error.empty()) out["error"] = c.error;
  if (c.spec.model == ModelKind::rf) out["rf_trees"] = c.pipeline.propensity.rf_trees;
  json folds = json::array();
  for (const auto& f : c.cv_folds) folds.push_back(diagnostics_json(f));
  out["cv_diagnostics"] = {{"mean", diagnostics_json(c.cv)}, {"folds", folds}};
  out["fit_diagnostics"] = diagnostics_json(c.full_fit);
  out["n_pairs"] = c.n_pairs;
  json pairs = json::array();
  for (const auto& [control, treated] : c.pairs) pairs.push_back({control, treated});
  out["pairs"] = pairs;
  out["matched_ate"] = number(c.matched_ate);
  out["smd"] = number(c.evaluation.smd);
  out["smd_valid"] = c.evaluation.smd_valid;
  out["overlap_valid"] = c.evaluation.overlap_valid;
  out["strategy_input"] = c.strategy_input;
  out["balance"] = balance_json(c.balance);
  out["a2a"] = a2a;
  return out;
}

json selection_json(const SelectionResult& s) {
  json sel = json::array();
  for (std::size_t i = 0; i < s.selected.size(); ++i)
    sel.push_back({{"pipeline_id", s.selected[i]}, {"ate", number(s.selected_ates[i])}});
  json out = {{"strategy", to_string(s.strategy)}, {"selected", sel}, {"ate_range", number(s.ate_range)}};
  if (!s.notice.empty()) out["notice"] = s.notice;
  return out;
}

// Table-2 style grid: overlap per model and link.
json overlap_grid(const RunReport& r) {
  json grid = json::array();
  for (const auto& c : r.candidates) {
    if (c.spec.matcher != MatchMethod::optimal &&
        std::any_of(r.candidates.begin(), r.candidates.end(), [&](const CandidateReport& o) {
          return o.spec.model == c.spec.model && o.spec.use_logit_link == c.spec.use_logit_link &&
                 o.spec.matcher == MatchMethod::optimal;
        }))
      continue;
    grid.push_back({{"model", to_string(c.spec.model)},
                    {"link", c.spec.use_logit_link ? "logit" : "raw"},
                    {"overlap", number(c.cv.overlap)},
                    {"valid", c.cv.valid}});
  }
  return grid;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string run_report_json(const RunReport& r) {
  json j;
  j["task"] = r.task_name;
  j["summary"] = {{"n_control", r.summary.n_control},
                  {"n_treated", r.summary.n_treated},
                  {"unadjusted_ate", number(r.summary.ate)},
                  {"smd", number(r.summary.balance.scalar(r.aggregate))},
                  {"balance", balance_json(r.summary.balance)}};
  if (r.true_ate) j["true_ate"] = number(*r.true_ate);
  j["a2a_reference"] = {{"ate", number(r.reference.ate)},
                        {"smd", number(r.reference.smd)},
                        {"target_ate", number(0.5 * r.reference.ate)},
                        {"target_smd", number(0.5 * r.reference.smd)}};
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back(candidate_json(c));
  j["candidates"] = cands;
  json sels = json::array();
  for (const auto& s : r.selections) sels.push_back(selection_json(s));
  j["strategies"] = sels;
  j["diagnostics"] = {{"overlap_grid", overlap_grid(r)}, {"rf_tree_choice", r.rf_grid_notes}};
  j["warnings"] = r.warnings;

  json prov;
  prov["version"] = kVersion;
  prov["seed"] = r.seed;
  prov["a2a_seed"] = r.a2a_seed;
  prov["n_bootstraps"] = r.n_bootstraps;
  prov["smd_aggregate"] = to_string(r.aggregate);
  prov["strategy_params"] = {{"smd_threshold", r.strategy_params.smd_threshold},
                             {"eps", r.strategy_params.eps},
                             {"min_pts", r.strategy_params.min_pts}};
  if (r.synth) {
    const SynthConfig& s = r.synth->config;
    prov["synthetic"] = {{"n_samples", s.n_samples},
                         {"n_features", s.n_features},
                         {"n_confounders", s.n_confounders},
                         {"effect_scale", s.effect_scale},
                         {"noise_sd", s.noise_sd},
                         {"selection_intercept", s.selection_intercept},
                         {"selection_scale", s.selection_scale},
                         {"selection_weight", r.synth->selection_weight},
                         {"seed", s.seed},
                         {"confounders", r.synth->roles.confounders},
                         {"selection_only", r.synth->roles.selection_only},
                         {"outcome_only", r.synth->roles.outcome_only},
                         {"outcome_slots", r.synth->roles.outcome_slots()}};
  }
  prov["decisions"] = {
      "propensity diagnostics are computed on the values the pipeline matches on (logit of the clipped score "
      "under the logit link)",
      "overlap validity uses the mean overlap of the held-out cross-validation folds",
      "strategy inputs exclude overlap-invalid and failed candidates",
      "optimal matching is an exact dynamic program over sorted scores",
      "per-bootstrap seeds: resample (seed, b, 0), hill climbing (seed, b, 1), pipeline (seed, b, 2)",
      "clustering runs on min-max normalised (smd, a2a)"};
  j["provenance"] = prov;
  return j.dump(2) + "\n";
}

std::string run_report_markdown(const RunReport& r) {
  std::ostringstream md;
  md << "# Matching report: " << r.task_name << "\n\n";
  md << "- samples: " << r.summary.n_control << " control, " << r.summary.n_treated << " treated\n";
  md << "- unadjusted ATE: " << fixed(r.summary.ate) << "\n";
  md << "- unadjusted SMD (" << to_string(r.aggregate) << "): " << fixed(r.summary.balance.scalar(r.aggregate))
     << "\n";
  if (r.true_ate) md << "- true ATE: " << fixed(*r.true_ate) << "\n";
  md << "- bootstraps: " << r.n_bootstraps << ", seed: " << r.seed << "\n\n";

  md << "## Candidates\n\n";
  md << "| pipeline | status | overlap | SMD | A2A | ATE |\n|---|---|---|---|---|---|\n";
  for (const auto& c : r.candidates) {
    md << "| " << c.pipeline_id << " | " << to_string(c.status) << " | " << fixed(c.cv.overlap, 2)
       << (c.cv.valid ? "" : " (invalid)") << " | " << fixed(c.evaluation.smd)
       << (c.evaluation.smd_valid ? "" : " *") << " | " << fixed(c.evaluation.a2a) << " | "
       << fixed(c.matched_ate) << " |\n";
  }
  md << "\n`*` SMD not below " << fixed(r.strategy_params.smd_threshold, 2) << ".\n\n";

  md << "## Strategies\n\n| strategy | selected | ATE range |\n|---|---|---|\n";
  for (const auto& s : r.selections) {
    std::string ids;
    for (const auto& id : s.selected) ids += (ids.empty() ? "" : ", ") + id;
    if (ids.empty()) ids = "(none: " + s.notice + ")";
    md << "| " << to_string(s.strategy) << " | " << ids << " | " << fixed(s.ate_range) << " |\n";
  }
  if (!r.warnings.empty()) {
    md << "\n## Warnings\n\n";
    for (const auto& w : r.warnings) md << "- " << w << "\n";
  }
  return md.str();
}

void write_run_report(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", run_report_json(r));
  write_text(dir / "report.md", run_report_markdown(r));

  std::ostringstream cands;
  cands << "pipeline_id,status,smd,a2a,ate,smd_valid,overlap_valid,strategy_input\n";
  for (const auto& c : r.candidates)
    cands << c.pipeline_id << ',' << to_string(c.status) << ',' << csv_number(c.evaluation.smd) << ','
          << csv_number(c.evaluation.a2a) << ',' << csv_number(c.matched_ate) << ',' << c.evaluation.smd_valid
          << ',' << c.evaluation.overlap_valid << ',' << c.strategy_input << '\n';
  write_text(dir / "candidates.csv", cands.str());

  std::ostringstream bal;
  bal << "pipeline_id,feature,kind,smd\n";
  for (const auto& f : r.summary.balance.per_feature)
    bal << "unadjusted," << f.feature << ',' << (f.kind == SmdKind::cohens_d ? "cohens_d" : "cramers_v") << ','
        << csv_number(f.smd) << '\n';
  for (const auto& c : r.candidates)
    for (const auto& f : c.balance.per_feature)
      bal << c.pipeline_id << ',' << f.feature << ',' << (f.kind == SmdKind::cohens_d ? "cohens_d" : "cramers_v")
          << ',' << csv_number(f.smd) << '\n';
  write_text(dir / "balance.csv", bal.str());

  std::ostringstream boots;
  boots << "pipeline_id,bootstrap,ok,unadjusted_ate,ate,smd\n";
  for (const auto& c : r.candidates)
    for (const auto& rec : c.a2a.records)
      boots << c.pipeline_id << ',' << rec.index << ',' << rec.ok << ',' << csv_number(rec.unadjusted_ate) << ','
            << (rec.ok ? csv_number(rec.ate) : "") << ',' << (rec.ok ? csv_number(rec.smd) : "") << '\n';
  write_text(dir / "a2a_bootstraps.csv", boots.str());
}

std::string confounder_table_csv(const std::vector<ConfounderRow>& rows) {
  std::ostringstream os;
  os << "confounders,runs";
  for (Strategy s : kAllStrategies) os << ",range_" << to_string(s);
  for (Strategy s : kAllStrategies) os << ",mse_" << to_string(s);
  os << ",invalid_fraction_raw,invalid_fraction_logit\n";
  for (const auto& r : rows) {
    os << r.k << ',' << r.runs;
    for (double v : r.ate_range) os << ',' << csv_number(v);
    for (double v : r.mse) os << ',' << csv_number(v);
    os << ',' << csv_number(r.invalid_fraction[0]) << ',' << csv_number(r.invalid_fraction[1]) << '\n';
  }
  return os.str();
}

std::string confounder_table_markdown(const std::vector<ConfounderRow>& rows) {
  std::ostringstream os;
  os << "| k | range SMD | range SMDxA2A | range Pareto | err SMD | err SMDxA2A | err Pareto | err Min A2A | "
        "err Min SMD | invalid raw | invalid logit |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  // kAllStrategies order: smd_threshold, min_smd, min_a2a, smd_x_a2a, pareto.
  for (const auto& r : rows) {
    os << "| " << r.k << " | " << fixed(r.ate_range[0]) << " | " << fixed(r.ate_range[3]) << " | "
       << fixed(r.ate_range[4]) << " | " << fixed(r.mse[0]) << " | " << fixed(r.mse[3]) << " | " << fixed(r.mse[4])
       << " | " << fixed(r.mse[2]) << " | " << fixed(r.mse[1]) << " | " << fixed(r.invalid_fraction[0], 2) << " | "
       << fixed(r.invalid_fraction[1], 2) << " |\n";
  }
  return os.str();
}

std::string correlation_table_csv(const std::vector<CorrelationRow>& rows) {
  std::ostringstream os;
  os << "confounders,correction_tau,correction_tau_sd,correction_p,truth_tau,truth_tau_sd,truth_p,"
        "random_tau,random_tau_sd,random_p,rankings,skipped\n";
  for (const auto& r : rows) {
    os << r.k;
    for (const auto* c : {&r.correction, &r.ground_truth, &r.random})
      os << ',' << csv_number(c->mean_tau) << ',' << csv_number(c->sd_tau) << ',' << csv_number(c->mean_p);
    os << ',' << r.correction.count << ',' << r.skipped << '\n';
  }
  return os.str();
}

std::string correlation_table_markdown(const std::vector<CorrelationRow>& rows) {
  std::ostringstream os;
  os << "| k | correction tau | p | ground truth tau | p | random tau | p |\n|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << r.k;
    for (const auto* c : {&r.correction, &r.ground_truth, &r.random})
      os << " | " << fixed(c->mean_tau, 2) << " ± " << fixed(c->sd_tau, 2) << " | " << fixed(c->mean_p, 2);
    os << " |\n";
  }
  return os.str();
}

}  // namespace matchforge
