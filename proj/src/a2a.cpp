#include "matchforge/a2a.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "matchforge/errors.hpp"
#include "matchforge/parallel.hpp"
#include "matchforge/random.hpp"

namespace matchforge {
namespace {

// Running per-subset sums that give the partition loss in O(features) after
// a swap. Continuous values are centred on the source mean to keep the sums
// of squares well conditioned.
class PartitionStats {
 public:
  PartitionStats(const Covariates& source, std::span<const double> outcomes, SmdAggregate aggregate)
      : aggregate_(aggregate), outcomes_(outcomes) {
    const auto n = source.continuous.rows();
    n_cont_ = static_cast<std::size_t>(source.continuous.cols());
    centred_ = source.continuous;
    for (Eigen::Index j = 0; j < source.continuous.cols(); ++j)
      centred_.col(j).array() -= source.continuous.col(j).mean();
    categorical_ = source.categorical;
    for (Eigen::Index j = 0; j < categorical_.cols(); ++j) {
      const int levels = n ? categorical_.col(j).maxCoeff() + 1 : 0;
      level_offset_.push_back(total_levels_);
      total_levels_ += static_cast<std::size_t>(levels);
    }
    for (auto& side : side_) {
      side.sum.assign(n_cont_, 0.0);
      side.sq.assign(n_cont_, 0.0);
      side.levels.assign(total_levels_, 0.0);
    }
  }

  void add(std::size_t i, int h, double sign) {
    Side& s = side_[h];
    s.n += sign;
    s.y += sign * outcomes_[i];
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n_cont_; ++j) {
      const double v = centred_(r, static_cast<Eigen::Index>(j));
      s.sum[j] += sign * v;
      s.sq[j] += sign * v * v;
    }
    for (std::size_t j = 0; j < level_offset_.size(); ++j)
      s.levels[level_offset_[j] + static_cast<std::size_t>(categorical_(r, static_cast<Eigen::Index>(j)))] += sign;
  }

  // Returns +inf when a Cohen's D is undefined (zero pooled deviation, distinct means).
  double loss(const ReferenceTargets& ref) const {
    const Side& c = side_[0];
    const Side& t = side_[1];
    const double ate = t.y / t.n - c.y / c.n;
    double total = 0.0, worst = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n_cont_; ++j) {
      const double m0 = c.sum[j] / c.n;
      const double m1 = t.sum[j] / t.n;
      const double ss = std::max(0.0, c.sq[j] - c.sum[j] * m0) + std::max(0.0, t.sq[j] - t.sum[j] * m1);
      const double pooled = std::sqrt(ss / (c.n + t.n - 2));
      double d = 0.0;
      if (pooled > 0.0) d = std::abs(m0 - m1) / pooled;
      else if (m0 != m1) return std::numeric_limits<double>::infinity();
      total += d;
      worst = std::max(worst, d);
      ++count;
    }
    for (std::size_t j = 0; j < level_offset_.size(); ++j) {
      const std::size_t begin = level_offset_[j];
      const std::size_t end = j + 1 < level_offset_.size() ? level_offset_[j + 1] : total_levels_;
      const double n = c.n + t.n;
      double chi2 = 0.0;
      std::size_t present = 0;
      for (std::size_t l = begin; l < end; ++l) {
        const double col = c.levels[l] + t.levels[l];
        if (col <= 0.0) continue;
        ++present;
        const double e0 = c.n * col / n;
        const double e1 = t.n * col / n;
        chi2 += (c.levels[l] - e0) * (c.levels[l] - e0) / e0 + (t.levels[l] - e1) * (t.levels[l] - e1) / e1;
      }
      const double v = present < 2 ? 0.0 : std::min(1.0, std::sqrt(chi2 / n));
      total += v;
      worst = std::max(worst, v);
      ++count;
    }
    const double smd = count == 0 ? 0.0 : aggregate_ == SmdAggregate::mean ? total / static_cast<double>(count) : worst;
    return partition_loss(ate, smd, ref);
  }

 private:
  struct Side {
    double n = 0.0;
    double y = 0.0;
    std::vector<double> sum, sq, levels;
  };

  SmdAggregate aggregate_;
  std::span<const double> outcomes_;
  std::size_t n_cont_ = 0;
  Eigen::MatrixXd centred_;
  Eigen::MatrixXi categorical_;
  std::vector<std::size_t> level_offset_;
  std::size_t total_levels_ = 0;
  Side side_[2];
};

std::vector<double> gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v(static_cast<Eigen::Index>(rows[i]));
  return out;
}

A2AResult summarize(std::vector<BootstrapRecord> records) {
  A2AResult r;
  r.n_bootstraps = records.size();
  for (const auto& rec : records)
    if (rec.ok) r.per_bootstrap.push_back(std::abs(rec.ate));
  r.records = std::move(records);
  if (r.per_bootstrap.empty() || 2 * r.failures() > r.n_bootstraps) {
    r.available = false;
    r.error = std::to_string(r.failures()) + " of " + std::to_string(r.n_bootstraps) + " bootstraps failed";
    for (const auto& rec : r.records) {
      if (!rec.ok) {
        r.error += " (first: " + rec.error + ")";
        break;
      }
    }
    r.mean = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = std::accumulate(r.per_bootstrap.begin(), r.per_bootstrap.end(), 0.0) /
           static_cast<double>(r.per_bootstrap.size());
  return r;
}

PropensityConfig fit_config(const PropensityConfig& cfg, std::uint64_t seed) {
  PropensityConfig out = cfg;
  out.seed = seed;
  out.use_logit_link = false;
  return out;
}

}  // namespace

ReferenceTargets reference_targets(const DesignMatrix& data, const BalanceOptions& balance) {
  const TaskSummary s = summarize_task(data, balance);
  const bool treated_small = s.n_treated <= s.n_control;
  return {treated_small ? s.ate : -s.ate, s.balance.scalar(balance.aggregate)};
}

void HillClimbConfig::validate() const {
  if (!(membership_probs[0] > 0.0 && membership_probs[1] > 0.0) ||
      std::abs(membership_probs[0] + membership_probs[1] - 1.0) > 1e-9)
    throw Error("membership probabilities must be positive and sum to 1");
}

double partition_loss(double achieved_ate, double achieved_smd, const ReferenceTargets& ref) {
  const double a = 0.5 * ref.ate - achieved_ate;
  const double s = 0.5 * ref.smd - achieved_smd;
  return a * a + s * s;
}

double partition_loss(const Covariates& source, std::span<const double> outcomes,
                      std::span<const std::size_t> pseudo_control, std::span<const std::size_t> pseudo_treated,
                      const ReferenceTargets& ref, SmdAggregate aggregate) {
  if (pseudo_control.empty() || pseudo_treated.empty()) throw Error("partition_loss needs two non-empty subsets");
  std::vector<double> y0, y1;
  for (auto i : pseudo_control) y0.push_back(outcomes[i]);
  for (auto i : pseudo_treated) y1.push_back(outcomes[i]);
  const BalanceReport b = balance_report(source.subset(pseudo_control), source.subset(pseudo_treated),
                                         BalanceOptions{aggregate, 0.10});
  return partition_loss(ate(y0, y1), b.scalar(aggregate), ref);
}

std::array<std::size_t, 2> artificial_task_sizes(std::size_t n, const std::array<double, 2>& membership_probs) {
  const auto control = static_cast<std::size_t>(std::llround(static_cast<double>(n) * membership_probs[0]));
  return {control, n - control};
}

ArtificialTask build_artificial_task(const Covariates& source, std::span<const double> outcomes,
                                     const ReferenceTargets& ref, const HillClimbConfig& cfg,
                                     SmdAggregate aggregate) {
  cfg.validate();
  const std::size_t n = outcomes.size();
  if (n < 4) throw Error("artificial tasks need at least 4 source samples");
  if (source.rows() != n) throw Error("source covariates and outcomes differ in length");
  const auto sizes = artificial_task_sizes(n, cfg.membership_probs);
  if (sizes[0] == 0 || sizes[1] == 0) throw Error("membership probabilities leave a subset empty");

  Rng rng = make_rng(cfg.seed, {0x68696c6c});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> members[2] = {{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes[0])},
                                         {order.begin() + static_cast<std::ptrdiff_t>(sizes[0]), order.end()}};

  PartitionStats stats(source, outcomes, aggregate);
  for (int h = 0; h < 2; ++h)
    for (auto i : members[h]) stats.add(i, h, 1.0);

  ArtificialTask task;
  task.target_ate = 0.5 * ref.ate;
  task.target_smd = 0.5 * ref.smd;
  double current = stats.loss(ref);
  task.initial_loss = current;
  if (cfg.record_trace) task.loss_trace.push_back(current);

  std::uniform_int_distribution<std::size_t> pick0(0, sizes[0] - 1), pick1(0, sizes[1] - 1);
  std::size_t rejected_run = 0;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    ++task.iterations;
    const std::size_t a = pick0(rng);
    const std::size_t b = pick1(rng);
    const std::size_t i = members[0][a];
    const std::size_t j = members[1][b];
    stats.add(i, 0, -1.0);
    stats.add(j, 1, -1.0);
    stats.add(i, 1, 1.0);
    stats.add(j, 0, 1.0);
    const double candidate = stats.loss(ref);
    if (candidate < current) {
      current = candidate;
      std::swap(members[0][a], members[1][b]);
      ++task.accepted;
      rejected_run = 0;
      if (cfg.record_trace) task.loss_trace.push_back(current);
    } else {
      stats.add(i, 1, -1.0);
      stats.add(j, 0, -1.0);
      stats.add(i, 0, 1.0);
      stats.add(j, 1, 1.0);
      if (cfg.patience && ++rejected_run >= cfg.patience) break;
    }
  }
  task.achieved_loss = current;
  std::sort(members[0].begin(), members[0].end());
  std::sort(members[1].begin(), members[1].end());
  task.pseudo_control = std::move(members[0]);
  task.pseudo_treated = std::move(members[1]);
  return task;
}

Pipeline make_pipeline(const PipelineSpec& spec, const BalanceOptions& balance) {
  return [spec, balance](const DesignMatrix& task, std::uint64_t seed) {
    PipelineSpec s = spec;
    s.propensity.seed = seed;
    const PipelineOutcome out = run_spec(task, s, balance);
    return PipelineRun{out.matched.ate, out.matched.balance.scalar(balance.aggregate)};
  };
}

BootstrapTask make_bootstrap_task(const DesignMatrix& data, const ReferenceTargets& ref, std::size_t b,
                                  const A2AOptions& opts) {
  const ArmSplit arms = split_by_treatment(data);
  const bool treated_small = arms.treated.size() <= arms.control.size();
  const auto& large = treated_small ? arms.control : arms.treated;
  const double n = static_cast<double>(data.rows());

  Rng rng = make_rng(opts.seed, {b, 0});
  std::uniform_int_distribution<std::size_t> draw(0, large.size() - 1);
  std::vector<std::size_t> rows(large.size());
  for (auto& r : rows) r = large[draw(rng)];

  const Covariates source = data.raw.subset(rows);
  const std::vector<double> y = gather(data.outcome, rows);
  HillClimbConfig hc;
  hc.max_iters = opts.max_iters;
  hc.patience = opts.patience;
  hc.seed = derive_seed(opts.seed, {b, 1});
  hc.membership_probs = {static_cast<double>(large.size()) / n, 1.0 - static_cast<double>(large.size()) / n};

  BootstrapTask out;
  out.partition = build_artificial_task(source, y, ref, hc, opts.balance.aggregate);
  std::vector<std::size_t> task_rows;
  for (auto i : out.partition.pseudo_control) task_rows.push_back(rows[i]);
  for (auto i : out.partition.pseudo_treated) task_rows.push_back(rows[i]);
  out.task = data.subset(task_rows);
  const std::size_t n_control = out.partition.pseudo_control.size();
  for (std::size_t i = 0; i < out.task.treatment.size(); ++i) out.task.treatment[i] = i < n_control ? 0 : 1;

  std::vector<double> y0, y1;
  for (auto i : out.partition.pseudo_control) y0.push_back(y[i]);
  for (auto i : out.partition.pseudo_treated) y1.push_back(y[i]);
  out.unadjusted_ate = ate(y0, y1);
  out.pipeline_seed = derive_seed(opts.seed, {b, 2});
  return out;
}

std::size_t A2AResult::failures() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

A2AResult compute_a2a(const DesignMatrix& data, const Pipeline& pipeline, const A2AOptions& opts) {
  if (opts.n_bootstraps == 0) throw Error("A2A needs at least one bootstrap");
  const ReferenceTargets ref = reference_targets(data, opts.balance);
  std::vector<BootstrapRecord> records(opts.n_bootstraps);
  parallel_for(
      opts.n_bootstraps,
      [&](std::size_t b) {
        BootstrapRecord& rec = records[b];
        rec.index = b;
        try {
          const BootstrapTask bt = make_bootstrap_task(data, ref, b, opts);
          rec.unadjusted_ate = bt.unadjusted_ate;
          const PipelineRun run = pipeline(bt.task, bt.pipeline_seed);
          rec.ate = run.ate;
          rec.smd = run.smd;
          rec.ok = true;
        } catch (const Error& e) {
          rec.error = e.what();
        }
      },
      opts.workers);
  A2AResult r = summarize(std::move(records));
  if (!r.available) throw A2AUnavailableError(r.error);
  return r;
}

std::vector<A2AResult> compute_a2a(const DesignMatrix& data, std::span<const PipelineSpec> specs,
                                   const A2AOptions& opts) {
  if (opts.n_bootstraps == 0) throw Error("A2A needs at least one bootstrap");
  const ReferenceTargets ref = reference_targets(data, opts.balance);
  // records[spec][bootstrap]
  std::vector<std::vector<BootstrapRecord>> records(specs.size(), std::vector<BootstrapRecord>(opts.n_bootstraps));
  parallel_for(
      opts.n_bootstraps,
      [&](std::size_t b) {
        for (auto& per_spec : records) per_spec[b].index = b;
        BootstrapTask bt;
        try {
          bt = make_bootstrap_task(data, ref, b, opts);
        } catch (const Error& e) {
          for (auto& per_spec : records) per_spec[b].error = e.what();
          return;
        }
        using Key = std::tuple<int, std::size_t, std::size_t, std::size_t>;
        std::map<Key, std::vector<double>> probabilities;
        std::map<Key, std::string> failed;
        for (std::size_t s = 0; s < specs.size(); ++s) {
          BootstrapRecord& rec = records[s][b];
          rec.unadjusted_ate = bt.unadjusted_ate;
          const PropensityConfig& cfg = specs[s].propensity;
          const Key key{static_cast<int>(cfg.model), cfg.rf_trees, cfg.rf_min_leaf, cfg.rf_max_depth};
          try {
            if (auto f = failed.find(key); f != failed.end()) throw Error(f->second);
            auto it = probabilities.find(key);
            if (it == probabilities.end()) {
              try {
                PropensityFit fit = fit_propensity(bt.task, fit_config(cfg, bt.pipeline_seed));
                it = probabilities.emplace(key, std::move(fit.probabilities)).first;
              } catch (const Error& e) {
                failed.emplace(key, e.what());
                throw;
              }
            }
            const auto values = clip_and_transform(it->second, cfg);
            const MatchOutcome m = match_and_measure(bt.task, values, specs[s].matcher, opts.balance);
            rec.ate = m.ate;
            rec.smd = m.balance.scalar(opts.balance.aggregate);
            rec.ok = true;
          } catch (const Error& e) {
            rec.error = e.what();
          }
        }
      },
      opts.workers);
  std::vector<A2AResult> out;
  out.reserve(specs.size());
  for (auto& per_spec : records) out.push_back(summarize(std::move(per_spec)));
  return out;
}

}  // namespace matchforge
