#include "matchforge/runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "matchforge/errors.hpp"
#include "matchforge/parallel.hpp"
#include "matchforge/random.hpp"
#include "matchforge/report.hpp"

namespace matchforge {
namespace {

constexpr std::uint64_t kA2ASeedTag = 0x613261;
constexpr std::uint64_t kRandomRankTag = 0x72616e64;

PropensityConfig base_config(const RunConfig& cfg, const CandidateSpec& c, std::size_t trees) {
  PropensityConfig p;
  p.model = c.model;
  p.use_logit_link = c.use_logit_link;
  p.rf_trees = trees;
  p.rf_min_leaf = cfg.rf_min_leaf;
  p.cv_folds = cfg.cv_folds;
  p.seed = cfg.seed;
  return p;
}

using FitKey = std::tuple<int, std::size_t>;

FitKey fit_key(const PropensityConfig& p) {
  return {static_cast<int>(p.model), p.model == ModelKind::rf ? p.rf_trees : 0};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

CorrelationCell summarize_taus(const std::vector<double>& taus, const std::vector<double>& ps) {
  CorrelationCell c;
  c.count = taus.size();
  if (taus.empty()) {
    c.mean_tau = c.sd_tau = c.mean_p = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.mean_tau = mean_of(taus);
  c.mean_p = mean_of(ps);
  double ss = 0.0;
  for (double t : taus) ss += (t - c.mean_tau) * (t - c.mean_tau);
  c.sd_tau = taus.size() > 1 ? std::sqrt(ss / static_cast<double>(taus.size() - 1)) : 0.0;
  return c;
}

}  // namespace

std::string CandidateSpec::id() const {
  return std::string(to_string(model)) + (use_logit_link ? "/logit/" : "/raw/") + std::string(to_string(matcher));
}

std::vector<CandidateSpec> default_candidates() {
  std::vector<CandidateSpec> out;
  for (ModelKind m : {ModelKind::lr, ModelKind::clr, ModelKind::rf})
    for (bool logit : {false, true})
      for (MatchMethod mm : {MatchMethod::nearest, MatchMethod::optimal}) out.push_back({m, logit, mm});
  return out;
}

void RunConfig::validate() const {
  if (candidates.empty()) throw Error("at least one candidate is required");
  if (rf_trees_grid.empty()) throw Error("the random forest tree grid is empty");
  if (n_bootstraps == 0) throw Error("at least one bootstrap is required");
  if (!synth && (data.empty() || schema.empty())) throw Error("a dataset and schema, or a synthetic task, is required");
  if (!(strategy.eps > 0.0) || strategy.min_pts < 1) throw Error("invalid clustering parameters");
}

std::string_view to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::ok: return "ok";
    case CandidateStatus::fit_failed: return "fit-failed";
    case CandidateStatus::matching_failed: return "matching-failed";
    case CandidateStatus::a2a_failed: return "a2a-failed";
  }
  return "?";
}

int RunReport::exit_code() const {
  const auto ok = std::count_if(candidates.begin(), candidates.end(),
                                [](const auto& c) { return c.status == CandidateStatus::ok; });
  if (ok == 0) return 3;
  return static_cast<std::size_t>(ok) == candidates.size() ? 0 : 2;
}

RunReport evaluate_task(const Dataset& data, const RunConfig& cfg, const std::string& task_name,
                        std::optional<double> true_ate) {
  if (cfg.candidates.empty()) throw Error("at least one candidate is required");
  const std::size_t workers = cfg.workers ? cfg.workers : default_worker_count();
  RunReport report;
  report.task_name = task_name;
  report.seed = cfg.seed;
  report.a2a_seed = derive_seed(cfg.seed, {kA2ASeedTag});
  report.n_bootstraps = cfg.n_bootstraps;
  report.aggregate = cfg.balance.aggregate;
  report.strategy_params = cfg.strategy;
  report.true_ate = true_ate;

  if (data.missing_count() > 0)
    report.warnings.push_back(std::to_string(data.missing_count()) + " missing cells imputed");
  const DesignMatrix m = encode(data.missing_count() ? impute(data) : data);
  report.warnings.insert(report.warnings.end(), m.warnings.begin(), m.warnings.end());
  report.summary = summarize_task(m, cfg.balance);
  report.reference = reference_targets(m, cfg.balance);
  const ArmSplit arms = split_by_treatment(m);

  // Cross-validated diagnostics for every (model, link, trees) combination in
  // one call, so fold fits are shared across links.
  std::vector<PropensityConfig> cv_configs;
  std::map<std::tuple<int, bool, std::size_t>, std::size_t> cv_index;
  for (const auto& c : cfg.candidates) {
    const std::vector<std::size_t> grid =
        c.model == ModelKind::rf ? cfg.rf_trees_grid : std::vector<std::size_t>{cfg.rf_trees_grid.front()};
    for (std::size_t trees : grid) {
      const auto key = std::make_tuple(static_cast<int>(c.model), c.use_logit_link,
                                       c.model == ModelKind::rf ? trees : 0);
      if (cv_index.count(key)) continue;
      cv_index[key] = cv_configs.size();
      cv_configs.push_back(base_config(cfg, c, trees));
    }
  }
  std::vector<CandidateDiagnostics> cv_diag(cv_configs.size());
  std::string cv_error;
  try {
    cv_diag = select_model(m, cv_configs).candidates;
  } catch (const Error& e) {
    cv_error = e.what();
    for (auto& d : cv_diag) {
      d.fit_failed = true;
      d.error = e.what();
    }
  }

  // Per candidate: pick the tree count (first grid entry wins ties), then fit
  // on all samples; full fits are shared between links and matchers.
  std::map<FitKey, PropensityFit> fits;
  std::map<FitKey, std::string> fit_errors;
  std::vector<PipelineSpec> a2a_specs;
  std::vector<std::size_t> a2a_owner;
  report.candidates.resize(cfg.candidates.size());
  for (std::size_t i = 0; i < cfg.candidates.size(); ++i) {
    const CandidateSpec& c = cfg.candidates[i];
    CandidateReport& r = report.candidates[i];
    r.spec = c;
    std::size_t chosen = cv_configs.size();
    const std::vector<std::size_t> grid =
        c.model == ModelKind::rf ? cfg.rf_trees_grid : std::vector<std::size_t>{cfg.rf_trees_grid.front()};
    for (std::size_t trees : grid) {
      const std::size_t idx = cv_index.at(
          std::make_tuple(static_cast<int>(c.model), c.use_logit_link, c.model == ModelKind::rf ? trees : 0));
      if (cv_diag[idx].fit_failed) continue;
      if (chosen == cv_configs.size() || cv_diag[idx].mean.composite > cv_diag[chosen].mean.composite)
        chosen = idx;
    }
    r.pipeline.matcher = c.matcher;
    if (chosen == cv_configs.size()) {
      r.pipeline.propensity = base_config(cfg, c, grid.front());
      r.pipeline_id = r.pipeline.id();
      r.status = CandidateStatus::fit_failed;
      const std::size_t first = cv_index.at(
          std::make_tuple(static_cast<int>(c.model), c.use_logit_link, c.model == ModelKind::rf ? grid.front() : 0));
      r.error = "cross-validation failed: " + (cv_diag[first].error.empty() ? cv_error : cv_diag[first].error);
      continue;
    }
    r.pipeline.propensity = cv_configs[chosen];
    r.pipeline_id = r.pipeline.id();
    r.cv = cv_diag[chosen].mean;
    r.cv_folds = cv_diag[chosen].folds;
    if (c.model == ModelKind::rf && cfg.rf_trees_grid.size() > 1)
      report.rf_grid_notes.push_back(std::string(c.use_logit_link ? "rf/logit: " : "rf/raw: ") +
                                     std::to_string(r.pipeline.propensity.rf_trees) + " trees");

    const FitKey key = fit_key(r.pipeline.propensity);
    if (!fits.count(key) && !fit_errors.count(key)) {
      try {
        PropensityConfig raw = r.pipeline.propensity;
        raw.use_logit_link = false;
        fits.emplace(key, fit_propensity(m, raw));
      } catch (const Error& e) {
        fit_errors.emplace(key, e.what());
      }
    }
    if (auto f = fit_errors.find(key); f != fit_errors.end()) {
      r.status = CandidateStatus::fit_failed;
      r.error = f->second;
      continue;
    }
    const PropensityFit& fit = fits.at(key);
    try {
      r.full_fit = diagnose(diagnostic_values(fit.probabilities, r.pipeline.propensity), m.treatment);
      const auto values = clip_and_transform(fit.probabilities, r.pipeline.propensity);
      const MatchOutcome mo = match_and_measure(m, values, c.matcher, cfg.balance);
      r.n_pairs = mo.match.pairs.size();
      const auto& large = mo.treated_is_small ? arms.control : arms.treated;
      const auto& small = mo.treated_is_small ? arms.treated : arms.control;
      for (const auto& p : mo.match.pairs) {
        const std::size_t a = m.group_index[large[p.large]];
        const std::size_t b = m.group_index[small[p.small]];
        r.pairs.emplace_back(mo.treated_is_small ? a : b, mo.treated_is_small ? b : a);
      }
      r.matched_ate = mo.ate;
      r.balance = mo.balance;
    } catch (const Error& e) {
      r.status = CandidateStatus::matching_failed;
      r.error = e.what();
      continue;
    }
    a2a_specs.push_back(r.pipeline);
    a2a_owner.push_back(i);
  }
  // rf notes repeat per matcher; keep one of each.
  std::sort(report.rf_grid_notes.begin(), report.rf_grid_notes.end());
  report.rf_grid_notes.erase(std::unique(report.rf_grid_notes.begin(), report.rf_grid_notes.end()),
                             report.rf_grid_notes.end());

  if (!a2a_specs.empty()) {
    A2AOptions opts;
    opts.n_bootstraps = cfg.n_bootstraps;
    opts.seed = report.a2a_seed;
    opts.max_iters = cfg.max_iters;
    opts.patience = cfg.patience;
    opts.balance = cfg.balance;
    opts.workers = workers;
    auto results = compute_a2a(m, a2a_specs, opts);
    for (std::size_t j = 0; j < results.size(); ++j) {
      CandidateReport& r = report.candidates[a2a_owner[j]];
      r.a2a = std::move(results[j]);
      if (!r.a2a.available) {
        r.status = CandidateStatus::a2a_failed;
        r.error = r.a2a.error;
      }
    }
  }

  std::vector<CandidateEvaluation> inputs;
  for (auto& r : report.candidates) {
    CandidateEvaluation& e = r.evaluation;
    e.pipeline_id = r.pipeline_id;
    e.smd = r.balance.scalar(cfg.balance.aggregate);
    e.a2a = r.status == CandidateStatus::ok ? r.a2a.mean : std::numeric_limits<double>::quiet_NaN();
    e.ate = r.matched_ate;
    e.smd_valid = r.status == CandidateStatus::ok && e.smd < cfg.strategy.smd_threshold;
    e.overlap_valid = r.cv.valid;
    r.strategy_input = r.status == CandidateStatus::ok && e.overlap_valid;
    if (r.strategy_input) inputs.push_back(e);
  }
  report.selections = apply_all(inputs, cfg.strategy);
  return report;
}

RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  RunReport report;
  if (cfg.synth) {
    SynthConfig sc = *cfg.synth;
    const SynthTask task = generate(sc);
    report = evaluate_task(task.dataset, cfg,
                           "synthetic-k" + std::to_string(sc.n_confounders) + "-s" + std::to_string(sc.seed),
                           task.true_ate);
    report.synth = task;
  } else {
    const auto schema = load_schema(cfg.schema);
    const Dataset d = load_csv(cfg.data, schema);
    report = evaluate_task(d, cfg, cfg.data.filename().string());
  }
  if (!cfg.output_dir.empty()) write_run_report(report, cfg.output_dir);
  return report;
}

std::optional<double> selection_mse(const SelectionResult& s, double true_ate) {
  if (s.selected_ates.empty()) return std::nullopt;
  double sum = 0.0;
  for (double a : s.selected_ates) sum += (a - true_ate) * (a - true_ate);
  return sum / static_cast<double>(s.selected_ates.size());
}

std::vector<SuiteRun> run_synthetic_suite(const SuiteConfig& cfg) {
  std::vector<std::pair<std::size_t, std::uint64_t>> units;
  for (auto k : cfg.k_values) {
    if (k > cfg.base.n_features) throw Error("confounder count exceeds the feature count");
    for (auto s : cfg.seeds) units.emplace_back(k, s);
  }
  const std::size_t workers = cfg.run.workers ? cfg.run.workers : default_worker_count();
  std::vector<SuiteRun> out(units.size());
  parallel_for(
      units.size(),
      [&](std::size_t u) {
        const auto [k, s] = units[u];
        SynthConfig sc = cfg.base;
        sc.n_confounders = k;
        sc.seed = derive_seed(s, {k});
        RunConfig rc = cfg.run;
        rc.synth = sc;
        rc.seed = s;
        rc.workers = 1;
        rc.output_dir.clear();
        const SynthTask task = generate(sc);
        out[u].k = k;
        out[u].seed = s;
        out[u].report = evaluate_task(task.dataset, rc,
                                      "synthetic-k" + std::to_string(k) + "-s" + std::to_string(s), task.true_ate);
        out[u].report.synth = task;
      },
      workers);
  return out;
}

std::vector<ConfounderRow> confounder_table(const std::vector<SuiteRun>& runs) {
  std::map<std::size_t, std::vector<const SuiteRun*>> by_k;
  for (const auto& r : runs) by_k[r.k].push_back(&r);
  std::vector<ConfounderRow> rows;
  for (const auto& [k, group] : by_k) {
    ConfounderRow row;
    row.k = k;
    row.runs = group.size();
    std::array<std::vector<double>, 5> ranges, errors;
    std::array<double, 2> invalid{}, fits{};
    for (const SuiteRun* run : group) {
      const RunReport& rep = run->report;
      for (std::size_t s = 0; s < rep.selections.size(); ++s) {
        ranges[s].push_back(rep.selections[s].ate_range);
        if (auto e = selection_mse(rep.selections[s], rep.true_ate.value_or(0.0))) errors[s].push_back(*e);
        else ++row.empty_selections[s];
      }
      // One CV fit per (model, link): the matcher does not change it.
      std::map<std::pair<int, bool>, bool> seen;
      for (const auto& c : rep.candidates) {
        const auto key = std::make_pair(static_cast<int>(c.spec.model), c.spec.use_logit_link);
        if (seen.count(key)) continue;
        seen[key] = true;
        const int link = c.spec.use_logit_link ? 1 : 0;
        fits[link] += 1;
        if (!c.cv.valid) invalid[link] += 1;
      }
    }
    for (std::size_t s = 0; s < 5; ++s) {
      row.ate_range[s] = mean_of(ranges[s]);
      row.mse[s] = mean_of(errors[s]);
    }
    for (int l = 0; l < 2; ++l)
      row.invalid_fraction[l] = fits[l] > 0 ? invalid[l] / fits[l] : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::vector<CorrelationRow> correlation_table(const std::vector<SuiteRun>& runs) {
  std::map<std::size_t, std::vector<const SuiteRun*>> by_k;
  for (const auto& r : runs) by_k[r.k].push_back(&r);
  std::vector<CorrelationRow> rows;
  for (const auto& [k, group] : by_k) {
    CorrelationRow row;
    row.k = k;
    std::vector<double> tc, pc, tg, pg, tr, pr;
    for (const SuiteRun* run : group) {
      const RunReport& rep = run->report;
      std::vector<const CandidateReport*> inputs;
      for (const auto& c : rep.candidates)
        if (c.strategy_input) inputs.push_back(&c);
      for (std::size_t b = 0; b < rep.n_bootstraps; ++b) {
        std::vector<double> smd, correction, truth;
        for (const auto* c : inputs) {
          const BootstrapRecord& rec = c->a2a.records[b];
          if (!rec.ok) continue;
          smd.push_back(rec.smd);
          correction.push_back(std::abs(rec.unadjusted_ate - rec.ate));
          truth.push_back(std::abs(rec.ate));
        }
        if (smd.size() < 3) {
          ++row.skipped;
          continue;
        }
        std::vector<double> random(smd.size());
        std::iota(random.begin(), random.end(), 0.0);
        Rng rng = make_rng(rep.seed, {kRandomRankTag, k, b});
        std::shuffle(random.begin(), random.end(), rng);
        try {
          const auto c = kendall_tau(smd, correction);
          const auto g = kendall_tau(smd, truth);
          const auto r = kendall_tau(smd, random);
          tc.push_back(c.tau);
          pc.push_back(c.p_value);
          tg.push_back(g.tau);
          pg.push_back(g.p_value);
          tr.push_back(r.tau);
          pr.push_back(r.p_value);
        } catch (const UndefinedTauError&) {
          ++row.skipped;
        }
      }
    }
    row.correction = summarize_taus(tc, pc);
    row.ground_truth = summarize_taus(tg, pg);
    row.random = summarize_taus(tr, pr);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace matchforge
