#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "matchforge/metrics.hpp"
#include "matchforge/pipeline.hpp"
#include "matchforge/tabular.hpp"

namespace matchforge {

// Bias profile of the real task, oriented from the larger arm to the smaller
// one: ate = mean(Y small arm) - mean(Y large arm), smd = scalar SMD between
// the arms. Artificial tasks aim at half of each.
struct ReferenceTargets {
  double ate = 0.0;
  double smd = 0.0;
};

ReferenceTargets reference_targets(const DesignMatrix& data, const BalanceOptions& balance = {});

struct HillClimbConfig {
  std::size_t max_iters = 20000;
  std::size_t patience = 2000;  // consecutive rejected swaps before stopping; 0 disables
  std::uint64_t seed = 0;
  // Share of the source going to (pseudo-control, pseudo-treated).
  std::array<double, 2> membership_probs{0.5, 0.5};
  bool record_trace = false;

  void validate() const;
};

struct ArtificialTask {
  std::vector<std::size_t> pseudo_control;  // sorted indices into the source
  std::vector<std::size_t> pseudo_treated;
  double target_ate = 0.0;  // half the reference ATE
  double target_smd = 0.0;  // half the reference SMD
  double initial_loss = 0.0;
  double achieved_loss = 0.0;
  std::size_t iterations = 0;
  std::size_t accepted = 0;
  // Current loss after initialisation and after every accepted swap (only
  // filled when record_trace is set).
  std::vector<double> loss_trace;
};

// (ref.ate / 2 - ATE)^2 + (ref.smd / 2 - SMD)^2 with
// ATE = mean(Y pseudo_treated) - mean(Y pseudo_control).
double partition_loss(double achieved_ate, double achieved_smd, const ReferenceTargets& ref);

// Same loss, measured from the source with the metrics module.
double partition_loss(const Covariates& source, std::span<const double> outcomes,
                      std::span<const std::size_t> pseudo_control, std::span<const std::size_t> pseudo_treated,
                      const ReferenceTargets& ref, SmdAggregate aggregate = SmdAggregate::mean);

// Sizes of the two subsets for a source of n samples.
std::array<std::size_t, 2> artificial_task_sizes(std::size_t n, const std::array<double, 2>& membership_probs);

// Random size-exact split of the source followed by hill climbing: swap one
// sample from each side, keep the swap only if the loss strictly drops.
ArtificialTask build_artificial_task(const Covariates& source, std::span<const double> outcomes,
                                     const ReferenceTargets& ref, const HillClimbConfig& cfg,
                                     SmdAggregate aggregate = SmdAggregate::mean);

struct A2AOptions {
  std::size_t n_bootstraps = 100;
  std::uint64_t seed = 0;
  std::size_t max_iters = 20000;
  std::size_t patience = 2000;
  BalanceOptions balance;
  std::size_t workers = 1;
};

// Matched ATE (pseudo-treated minus pseudo-control) and scalar SMD of one
// pipeline run on an artificial task.
struct PipelineRun {
  double ate = 0.0;
  double smd = 0.0;
};

// `seed` is derived per bootstrap; pipelines use it for their own randomness.
using Pipeline = std::function<PipelineRun(const DesignMatrix& task, std::uint64_t seed)>;

Pipeline make_pipeline(const PipelineSpec& spec, const BalanceOptions& balance = {});

// Bootstrap b: the larger arm resampled with replacement to its size, split
// into a pseudo-control / pseudo-treated task (treatment 0 / 1) that mimics
// half the real task's bias.
struct BootstrapTask {
  DesignMatrix task;
  ArtificialTask partition;
  double unadjusted_ate = 0.0;  // of the artificial task
  std::uint64_t pipeline_seed = 0;
};

BootstrapTask make_bootstrap_task(const DesignMatrix& data, const ReferenceTargets& ref, std::size_t b,
                                  const A2AOptions& opts);

struct BootstrapRecord {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  double unadjusted_ate = 0.0;
  double ate = 0.0;  // matched ATE on the artificial task
  double smd = 0.0;
};

struct A2AResult {
  std::vector<double> per_bootstrap;  // |matched ATE| of successful bootstraps, in index order
  double mean = 0.0;                  // the A2A score
  std::size_t n_bootstraps = 0;
  std::vector<BootstrapRecord> records;  // every bootstrap, in index order
  bool available = true;                 // false when more than half failed
  std::string error;

  std::size_t failures() const;
};

// Throws A2AUnavailableError when more than half of the bootstraps fail.
A2AResult compute_a2a(const DesignMatrix& data, const Pipeline& pipeline, const A2AOptions& opts);

// Several pipelines over the same bootstrap tasks; propensity fits are shared
// between pipelines that differ only in link or matcher. Equivalent to
// calling the single-pipeline overload with make_pipeline(spec) for each
// spec, except that unavailable results are flagged instead of thrown.
std::vector<A2AResult> compute_a2a(const DesignMatrix& data, std::span<const PipelineSpec> specs,
                                   const A2AOptions& opts);

}  // namespace matchforge
