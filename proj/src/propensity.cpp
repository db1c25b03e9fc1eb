#include "matchforge/propensity.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "matchforge/errors.hpp"
#include "matchforge/random.hpp"

namespace matchforge {
namespace {

constexpr double kExtremeLow = 0.05;
constexpr double kExtremeHigh = 0.95;
constexpr double kOverlapValidity = 0.5;

void check_arms(std::span<const int> treatment) { (void)split_by_treatment(treatment); }

std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

// Stratum 1..9 of a score, 0 when outside [0.05, 0.95].
int stratum(double s) {
  if (!(s >= kExtremeLow && s <= kExtremeHigh)) return 0;
  const int b = static_cast<int>(std::floor(s * 10.0 + 0.5));
  return std::clamp(b, 1, 9);
}

std::array<double, 10> histogram(std::span<const double> scores) {
  std::array<double, 10> h{};
  for (double s : scores) h[static_cast<std::size_t>(stratum(s))] += 1.0;
  for (auto& v : h) v /= static_cast<double>(scores.size());
  return h;
}

}  // namespace

std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::lr: return "lr";
    case ModelKind::clr: return "clr";
    case ModelKind::rf: return "rf";
  }
  return "lr";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "lr" || text == "LR") return ModelKind::lr;
  if (text == "clr" || text == "CLR") return ModelKind::clr;
  if (text == "rf" || text == "RF") return ModelKind::rf;
  throw Error("unknown propensity model '" + std::string(text) + "'");
}

void PropensityConfig::validate() const {
  if (!(clip.low > 0.0 && clip.low < clip.high && clip.high < 1.0))
    throw Error("clip bounds must satisfy 0 < low < high < 1");
  if (cv_folds < 2) throw Error("cv_folds must be at least 2");
  if (model == ModelKind::rf && rf_trees < 1) throw Error("rf_trees must be at least 1");
}

std::string PropensityConfig::label() const {
  std::string s(to_string(model));
  if (model == ModelKind::rf) s += std::to_string(rf_trees);
  if (use_logit_link) s += "+logit";
  return s;
}

std::vector<double> PropensityModel::predict(const Eigen::MatrixXd& features) const {
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          return m.predict(features);
        } else if constexpr (std::is_same_v<T, ChunkedLogisticModel>) {
          std::vector<double> mean(static_cast<std::size_t>(features.rows()), 0.0);
          for (const auto& chunk : m.chunks) {
            const auto p = chunk.predict(features);
            for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
          }
          for (auto& v : mean) v /= static_cast<double>(m.chunks.size());
          return mean;
        } else {
          const auto votes = m.forest.predict(features);
          std::vector<double> p(votes.size());
          for (std::size_t i = 0; i < votes.size(); ++i)
            p[i] = sigmoid(m.platt.intercept + m.platt.coef(0) * votes[i]);
          return p;
        }
      },
      model);
}

double accuracy_score(std::span<const double> scores, std::span<const int> treatment) {
  if (scores.size() != treatment.size()) throw Error("accuracy_score: size mismatch");
  double n0 = 0, n1 = 0, hit0 = 0, hit1 = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (treatment[i]) {
      n1 += 1;
      hit1 += scores[i] >= 0.5;
    } else {
      n0 += 1;
      hit0 += scores[i] < 0.5;
    }
  }
  if (n0 == 0 || n1 == 0) throw SingleArmError("accuracy_score needs both arms");
  return hit0 / n0 + hit1 / n1;
}

double extremes_ratio(std::span<const double> scores) {
  if (scores.empty()) return 0.0;
  double outside = 0;
  for (double s : scores) outside += !(s >= kExtremeLow && s <= kExtremeHigh);
  return outside / static_cast<double>(scores.size());
}

double overlap_coefficient(std::span<const double> scores0, std::span<const double> scores1) {
  if (scores0.empty() || scores1.empty()) throw Error("overlap_coefficient needs two non-empty score sets");
  const auto h0 = histogram(scores0);
  const auto h1 = histogram(scores1);
  double overlap = 0.0;
  for (std::size_t i = 1; i <= 9; ++i) overlap += std::min(h0[i], h1[i]);
  return overlap;
}

std::vector<double> clip_and_transform(std::span<const double> scores, const PropensityConfig& cfg) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double c = std::clamp(scores[i], cfg.clip.low, cfg.clip.high);
    out[i] = cfg.use_logit_link ? std::log(c / (1.0 - c)) : c;
  }
  return out;
}

std::vector<double> diagnostic_values(std::span<const double> probabilities, const PropensityConfig& cfg) {
  if (!cfg.use_logit_link) return {probabilities.begin(), probabilities.end()};
  return clip_and_transform(probabilities, cfg);
}

DiagnosticScores diagnose(std::span<const double> values, std::span<const int> treatment) {
  std::vector<double> s0, s1;
  for (std::size_t i = 0; i < values.size(); ++i) (treatment[i] ? s1 : s0).push_back(values[i]);
  DiagnosticScores d;
  d.accuracy = accuracy_score(values, treatment);
  d.extremes_ratio = extremes_ratio(values);
  d.overlap = overlap_coefficient(s0, s1);
  d.composite = d.accuracy + (1.0 - d.extremes_ratio) + d.overlap;
  d.valid = d.overlap >= kOverlapValidity;
  return d;
}

PropensityFit finalize_fit(std::vector<double> probabilities, PropensityModel model,
                           std::span<const int> treatment, const PropensityConfig& cfg) {
  PropensityFit fit;
  fit.clipped.resize(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    fit.clipped[i] = std::clamp(probabilities[i], cfg.clip.low, cfg.clip.high);
  fit.matching_value = clip_and_transform(probabilities, cfg);
  fit.diagnostics = diagnose(diagnostic_values(probabilities, cfg), treatment);
  fit.probabilities = std::move(probabilities);
  fit.model = std::move(model);
  return fit;
}

PropensityFit fit_lr(const DesignMatrix& m, const PropensityConfig& cfg) {
  cfg.validate();
  check_arms(m.treatment);
  LogisticModel model = fit_logistic(m.features, m.treatment, balanced_weights(m.treatment));
  auto probabilities = model.predict(m.features);
  return finalize_fit(std::move(probabilities), PropensityModel{std::move(model)}, m.treatment, cfg);
}

std::vector<std::size_t> clr_chunk_sizes(std::size_t n_large, std::size_t n_small) {
  if (n_small == 0 || n_large < n_small) throw Error("chunking needs n_large >= n_small >= 1");
  std::vector<std::size_t> sizes(n_large / n_small, n_small);
  if (n_large % n_small) sizes.push_back(n_large % n_small);
  return sizes;
}

PropensityFit fit_clr(const DesignMatrix& m, const PropensityConfig& cfg) {
  cfg.validate();
  const ArmSplit arms = split_by_treatment(m);
  const bool treated_larger = arms.treated.size() > arms.control.size();
  std::vector<std::size_t> large = treated_larger ? arms.treated : arms.control;
  const std::vector<std::size_t>& small = treated_larger ? arms.control : arms.treated;
  if (small.size() < 2) throw Error("chunked logistic regression needs at least 2 samples per arm");

  Rng rng = make_rng(cfg.seed, {0x636c72});
  std::shuffle(large.begin(), large.end(), rng);

  ChunkedLogisticModel model;
  std::size_t offset = 0;
  for (std::size_t size : clr_chunk_sizes(large.size(), small.size())) {
    std::vector<std::size_t> rows(large.begin() + static_cast<std::ptrdiff_t>(offset),
                                  large.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
    rows.insert(rows.end(), small.begin(), small.end());
    // Original row order, so a single chunk reproduces the plain fit exactly.
    std::sort(rows.begin(), rows.end());
    const DesignMatrix chunk = m.subset(rows);
    model.chunks.push_back(fit_logistic(chunk.features, chunk.treatment, balanced_weights(chunk.treatment)));
  }
  PropensityModel wrapped{std::move(model)};
  auto probabilities = wrapped.predict(m.features);
  return finalize_fit(std::move(probabilities), std::move(wrapped), m.treatment, cfg);
}

PropensityFit fit_rf(const DesignMatrix& m, const PropensityConfig& cfg) {
  cfg.validate();
  check_arms(m.treatment);
  ForestOptions opts;
  opts.trees = cfg.rf_trees;
  opts.min_leaf = cfg.rf_min_leaf;
  opts.max_depth = cfg.rf_max_depth;
  opts.seed = derive_seed(cfg.seed, {0x7266});
  Eigen::MatrixXd x = m.features;
  if (x.cols() == 0) x = Eigen::MatrixXd::Zero(m.features.rows(), 1);
  PlattForest model{RandomForest::fit(x, m.treatment, opts), {}};

  const auto& oob = model.forest.out_of_bag();
  Eigen::MatrixXd votes(static_cast<Eigen::Index>(oob.size()), 1);
  for (std::size_t i = 0; i < oob.size(); ++i) votes(static_cast<Eigen::Index>(i), 0) = oob[i];
  model.platt = fit_logistic(votes, m.treatment, unit_weights(oob.size()));
  // A falling slope means the votes carry only leave-out bias (a sample is
  // out of bag exactly where its own label was missing); use the base rate.
  if (!(model.platt.coef(0) > 0.0)) {
    double treated = 0.0;
    for (int t : m.treatment) treated += t;
    const double rate = treated / static_cast<double>(m.treatment.size());
    model.platt.coef(0) = 0.0;
    model.platt.intercept = std::log(rate / (1.0 - rate));
  }

  // Training samples are scored from their out-of-bag votes.
  std::vector<double> probabilities(oob.size());
  for (std::size_t i = 0; i < oob.size(); ++i)
    probabilities[i] = sigmoid(model.platt.intercept + model.platt.coef(0) * oob[i]);
  return finalize_fit(std::move(probabilities), PropensityModel{std::move(model)}, m.treatment, cfg);
}

PropensityFit fit_propensity(const DesignMatrix& m, const PropensityConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::lr: return fit_lr(m, cfg);
    case ModelKind::clr: return fit_clr(m, cfg);
    case ModelKind::rf: return fit_rf(m, cfg);
  }
  throw Error("unknown propensity model");
}

std::vector<std::size_t> stratified_folds(std::span<const int> treatment, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error("need at least 2 folds");
  ArmSplit arms = split_by_treatment(treatment);
  if (arms.control.size() < folds || arms.treated.size() < folds)
    throw Error("each arm needs at least one sample per fold");
  std::vector<std::size_t> fold(treatment.size());
  Rng rng = make_rng(seed, {0x666f6c64});
  for (auto* arm : {&arms.control, &arms.treated}) {
    std::shuffle(arm->begin(), arm->end(), rng);
    for (std::size_t i = 0; i < arm->size(); ++i) fold[(*arm)[i]] = i % folds;
  }
  return fold;
}

ModelSelection select_model(const DesignMatrix& m, std::span<const PropensityConfig> candidates) {
  if (candidates.empty()) throw NoModelError("no propensity candidates");
  for (const auto& c : candidates) c.validate();
  const std::size_t k = candidates.front().cv_folds;
  const std::uint64_t seed = candidates.front().seed;
  const auto fold = stratified_folds(m.treatment, k, seed);

  std::vector<std::vector<std::size_t>> train(k), test(k);
  for (std::size_t i = 0; i < fold.size(); ++i)
    for (std::size_t f = 0; f < k; ++f) (fold[i] == f ? test : train)[f].push_back(i);
  std::vector<DesignMatrix> train_sets, test_sets;
  for (std::size_t f = 0; f < k; ++f) {
    train_sets.push_back(m.subset(train[f]));
    test_sets.push_back(m.subset(test[f]));
  }

  // Held-out probabilities do not depend on the link; fits are shared
  // between candidates that differ only there.
  using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, std::uint64_t>;
  std::map<Key, std::vector<std::vector<double>>> cache;

  ModelSelection sel;
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const PropensityConfig& cfg = candidates[c];
    CandidateDiagnostics diag;
    try {
      const Key key{static_cast<int>(cfg.model), cfg.model == ModelKind::rf ? cfg.rf_trees : 0,
                    cfg.model == ModelKind::rf ? cfg.rf_min_leaf : 0,
                    cfg.model == ModelKind::rf ? cfg.rf_max_depth : 0, cfg.seed};
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::vector<std::vector<double>> held_out;
        for (std::size_t f = 0; f < k; ++f) {
          PropensityConfig fold_cfg = cfg;
          fold_cfg.seed = derive_seed(cfg.seed, {f});
          const PropensityFit fit = fit_propensity(train_sets[f], fold_cfg);
          held_out.push_back(fit.model.predict(test_sets[f].features));
        }
        it = cache.emplace(key, std::move(held_out)).first;
      }
      DiagnosticScores mean;
      for (std::size_t f = 0; f < k; ++f) {
        const auto d = diagnose(diagnostic_values(it->second[f], cfg), test_sets[f].treatment);
        diag.folds.push_back(d);
        mean.accuracy += d.accuracy / static_cast<double>(k);
        mean.extremes_ratio += d.extremes_ratio / static_cast<double>(k);
        mean.overlap += d.overlap / static_cast<double>(k);
        mean.composite += d.composite / static_cast<double>(k);
      }
      mean.valid = mean.overlap >= kOverlapValidity;
      diag.mean = mean;
      if (!any || mean.composite > best) {
        best = mean.composite;
        sel.best = c;
        any = true;
      }
    } catch (const Error& e) {
      diag.fit_failed = true;
      diag.error = e.what();
    }
    sel.candidates.push_back(std::move(diag));
  }
  if (!any) throw NoModelError("every propensity candidate failed to fit");
  sel.best_config = candidates[sel.best];
  return sel;
}

}  // namespace matchforge
