#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "matchforge/errors.hpp"
#include "matchforge/report.hpp"
#include "matchforge/runner.hpp"
#include "matchforge/synth.hpp"

using namespace matchforge;

namespace {

// "k=3,n=600,seed=7" -> overrides on top of the default generator.
SynthConfig parse_synth_spec(const std::string& text) {
  SynthConfig cfg;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("synthetic spec entries look like key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "k") cfg.n_confounders = std::stoul(value);
      else if (key == "n") cfg.n_samples = std::stoul(value);
      else if (key == "d") cfg.n_features = std::stoul(value);
      else if (key == "effect") cfg.effect_scale = std::stod(value);
      else if (key == "noise") cfg.noise_sd = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "intercept") cfg.selection_intercept = std::stod(value);
      else if (key == "scale") cfg.selection_scale = std::stod(value);
      else throw Error("unknown synthetic spec key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error("bad value for '" + key + "': " + value);
    }
  }
  cfg.validate();
  return cfg;
}

struct CommonOptions {
  std::size_t bootstraps = 100;
  std::uint64_t seed = 0;
  std::string smd_agg = "mean";
  double eps = 0.15;
  std::size_t min_pts = 2;
  std::size_t threads = 0;
  std::size_t max_iters = 20000;
  std::size_t patience = 2000;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--bootstraps", o.bootstraps, "Artificial tasks per A2A estimate")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  cmd->add_option("--smd-agg", o.smd_agg, "SMD aggregate")->check(CLI::IsMember({"mean", "max"}))->capture_default_str();
  cmd->add_option("--eps", o.eps, "Clustering radius in normalised (SMD, A2A) space")->capture_default_str();
  cmd->add_option("--min-pts", o.min_pts, "Clustering density threshold")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (default: MATCHFORGE_THREADS or all cores)");
  cmd->add_option("--max-iters", o.max_iters, "Hill-climbing iterations")->capture_default_str();
  cmd->add_option("--patience", o.patience, "Rejected swaps before hill climbing stops (0: never)")
      ->capture_default_str();
}

RunConfig run_config(const CommonOptions& o) {
  RunConfig cfg;
  cfg.n_bootstraps = o.bootstraps;
  cfg.seed = o.seed;
  cfg.balance.aggregate = parse_smd_aggregate(o.smd_agg);
  cfg.strategy.eps = o.eps;
  cfg.strategy.min_pts = o.min_pts;
  cfg.workers = o.threads;
  cfg.max_iters = o.max_iters;
  cfg.patience = o.patience;
  return cfg;
}

int run_command(const std::string& data, const std::string& schema, const std::string& synth,
                const std::string& out, const CommonOptions& o) {
  RunConfig cfg = run_config(o);
  cfg.data = data;
  cfg.schema = schema;
  if (!synth.empty()) cfg.synth = parse_synth_spec(synth);
  cfg.output_dir = out;
  const RunReport report = run_pipeline(cfg);
  std::cout << run_report_markdown(report);
  return report.exit_code();
}

int experiment_command(const std::string& which, const std::string& out, const CommonOptions& o,
                       const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds,
                       std::size_t samples, const std::string& generator) {
  SuiteConfig suite;
  if (!generator.empty()) suite.base = parse_synth_spec(generator);
  suite.base.n_samples = samples;
  suite.k_values = ks;
  suite.seeds = seeds;
  suite.run = run_config(o);
  const auto runs = run_synthetic_suite(suite);
  std::filesystem::create_directories(out);
  if (which == "confounders") {
    const auto rows = confounder_table(runs);
    write_text(std::filesystem::path(out) / "confounders.csv", confounder_table_csv(rows));
    write_text(std::filesystem::path(out) / "confounders.md", confounder_table_markdown(rows));
    std::cout << confounder_table_markdown(rows);
  } else {
    const auto rows = correlation_table(runs);
    write_text(std::filesystem::path(out) / "smd_correlation.csv", correlation_table_csv(rows));
    write_text(std::filesystem::path(out) / "smd_correlation.md", correlation_table_markdown(rows));
    std::cout << correlation_table_markdown(rows);
  }
  std::size_t failed = 0;
  for (const auto& r : runs) failed += r.report.exit_code() == 3;
  if (failed == runs.size()) return 3;
  return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propensity score matching with SMD and A2A based pipeline selection"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string data, schema, synth, out;
  auto* run = app.add_subcommand("run", "Evaluate every candidate pipeline on one task");
  run->add_option("--data", data, "CSV file");
  run->add_option("--schema", schema, "Schema JSON");
  run->add_option("--synth", synth, "Synthetic task instead of a file, e.g. k=3 or k=3,n=600,seed=1");
  run->add_option("--out", out, "Output directory")->required();
  add_common(run, run_opts);

  CommonOptions exp_opts;
  std::string which, exp_out;
  std::vector<std::size_t> ks{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t samples = 3000;
  bool quick = false;
  std::string generator;
  auto* exp = app.add_subcommand("experiment", "Synthetic confounder suite");
  exp->add_option("which", which, "confounders | smd-correlation")
      ->required()
      ->check(CLI::IsMember({"confounders", "smd-correlation"}));
  exp->add_option("--out", exp_out, "Output directory")->required();
  exp->add_option("--k", ks, "Confounder counts")->delimiter(',')->capture_default_str();
  exp->add_option("--seeds", seeds, "Seeds")->delimiter(',')->capture_default_str();
  exp->add_option("--samples", samples, "Samples per task")->capture_default_str();
  exp->add_flag("--quick", quick, "600 samples and 20 bootstraps");
  exp->add_option("--generator", generator, "Generator overrides in --synth syntax, e.g. effect=0,noise=0.5");
  add_common(exp, exp_opts);

  std::size_t syn_k = 0, syn_n = 3000, syn_d = 10;
  std::uint64_t syn_seed = 0;
  double syn_effect = 1.0, syn_noise = 1.0;
  std::string syn_out, syn_stem = "synthetic";
  auto* syn = app.add_subcommand("synth", "Export a synthetic task as CSV + schema JSON");
  syn->add_option("--k", syn_k, "Confounders")->capture_default_str();
  syn->add_option("--samples", syn_n, "Samples")->capture_default_str();
  syn->add_option("--features", syn_d, "Features")->capture_default_str();
  syn->add_option("--effect-scale", syn_effect, "Treatment effect scale")->capture_default_str();
  syn->add_option("--noise", syn_noise, "Outcome noise standard deviation")->capture_default_str();
  syn->add_option("--seed", syn_seed, "Seed")->capture_default_str();
  syn->add_option("--name", syn_stem, "File stem")->capture_default_str();
  syn->add_option("--out", syn_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (synth.empty() && (data.empty() || schema.empty())) {
        std::cerr << "run needs --data and --schema, or --synth\n";
        return 1;
      }
      return run_command(data, schema, synth, out, run_opts);
    }
    if (*exp) {
      if (quick) {
        samples = 600;
        if (exp->count("--bootstraps") == 0) exp_opts.bootstraps = 20;
      }
      return experiment_command(which, exp_out, exp_opts, ks, seeds, samples, generator);
    }
    if (*syn) {
      SynthConfig cfg;
      cfg.n_confounders = syn_k;
      cfg.n_samples = syn_n;
      cfg.n_features = syn_d;
      cfg.effect_scale = syn_effect;
      cfg.noise_sd = syn_noise;
      cfg.seed = syn_seed;
      const SynthTask task = generate(cfg);
      const auto [csv, schema_path] = export_task(task, syn_out, syn_stem);
      std::cout << csv.string() << "\n" << schema_path.string() << "\ntrue ATE " << task.true_ate << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
