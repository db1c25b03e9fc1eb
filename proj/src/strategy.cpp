#include "matchforge/strategy.hpp"

#include <algorithm>
#include <cmath>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

// SMD-valid, overlap-valid candidates sorted by pipeline_id.
std::vector<CandidateEvaluation> eligible(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  std::vector<CandidateEvaluation> out;
  for (const auto& c : cands)
    if (c.overlap_valid && c.smd < p.smd_threshold) out.push_back(c);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.pipeline_id < b.pipeline_id; });
  return out;
}

std::vector<CandidateEvaluation> require_eligible(std::span<const CandidateEvaluation> cands,
                                                  const StrategyParams& p, Strategy s) {
  auto out = eligible(cands, p);
  if (out.empty()) throw NoSelectionError(std::string(to_string(s)) + ": no SMD-valid candidate");
  return out;
}

SelectionResult make_result(Strategy s, std::vector<CandidateEvaluation> chosen) {
  std::sort(chosen.begin(), chosen.end(),
            [](const auto& a, const auto& b) { return a.pipeline_id < b.pipeline_id; });
  SelectionResult r;
  r.strategy = s;
  for (const auto& c : chosen) {
    r.selected.push_back(c.pipeline_id);
    r.selected_ates.push_back(c.ate);
  }
  if (r.selected_ates.size() > 1) {
    const auto [lo, hi] = std::minmax_element(r.selected_ates.begin(), r.selected_ates.end());
    r.ate_range = *hi - *lo;
  }
  if (r.selected.empty()) r.notice = "no candidate has SMD below the threshold";
  return r;
}

template <class Key>
SelectionResult select_min(std::span<const CandidateEvaluation> cands, const StrategyParams& p, Strategy s,
                           Key key) {
  const auto pool = require_eligible(cands, p, s);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (key(pool[i]) < key(pool[best])) best = i;
  return make_result(s, {pool[best]});
}

std::size_t argmin_a2a(const std::vector<CandidateEvaluation>& pool) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].a2a < pool[best].a2a) best = i;
  return best;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::smd_threshold: return "smd_threshold";
    case Strategy::min_smd: return "min_smd";
    case Strategy::min_a2a: return "min_a2a";
    case Strategy::smd_x_a2a: return "smd_x_a2a";
    case Strategy::pareto: return "pareto";
  }
  return "?";
}

void apply_threshold(std::span<CandidateEvaluation> cands, double threshold) {
  for (auto& c : cands) c.smd_valid = c.smd < threshold;
}

SelectionResult select_smd_threshold(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  if (cands.empty()) throw Error("select_smd_threshold needs at least one candidate");
  return make_result(Strategy::smd_threshold, eligible(cands, p));
}

SelectionResult select_min_smd(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  return select_min(cands, p, Strategy::min_smd, [](const auto& c) { return c.smd; });
}

SelectionResult select_min_a2a(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  return select_min(cands, p, Strategy::min_a2a, [](const auto& c) { return c.a2a; });
}

std::vector<int> dbscan(std::span<const Point2> points, double eps, std::size_t min_pts) {
  if (points.empty()) throw Error("dbscan needs at least one point");
  if (!(eps > 0.0)) throw Error("dbscan eps must be positive");
  if (min_pts < 1) throw Error("dbscan min_pts must be at least 1");
  const std::size_t n = points.size();

  auto bounds = [&](auto get) {
    double lo = get(points[0]), hi = lo;
    for (const auto& q : points) {
      lo = std::min(lo, get(q));
      hi = std::max(hi, get(q));
    }
    return std::pair{lo, hi - lo};
  };
  const auto [x0, xs] = bounds([](const Point2& q) { return q.x; });
  const auto [y0, ys] = bounds([](const Point2& q) { return q.y; });
  std::vector<Point2> z(n);
  for (std::size_t i = 0; i < n; ++i)
    z[i] = {xs > 0 ? (points[i].x - x0) / xs : 0.0, ys > 0 ? (points[i].y - y0) / ys : 0.0};

  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (std::hypot(z[i].x - z[j].x, z[i].y - z[j].y) <= eps) out.push_back(j);
    return out;
  };

  constexpr int unvisited = -2;
  std::vector<int> label(n, unvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != unvisited) continue;
    auto seeds = neighbours(i);
    if (seeds.size() < min_pts) {
      label[i] = -1;
      continue;
    }
    label[i] = cluster;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const std::size_t j = seeds[k];
      if (label[j] == -1) label[j] = cluster;  // border point
      if (label[j] != unvisited) continue;
      label[j] = cluster;
      auto more = neighbours(j);
      if (more.size() >= min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  return label;
}

SelectionResult select_smd_x_a2a(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  const auto pool = require_eligible(cands, p, Strategy::smd_x_a2a);
  std::vector<Point2> pts;
  for (const auto& c : pool) pts.push_back({c.smd, c.a2a});
  const auto labels = dbscan(pts, p.eps, p.min_pts);
  const std::size_t best = argmin_a2a(pool);
  if (labels[best] < 0) return make_result(Strategy::smd_x_a2a, {pool[best]});
  std::vector<CandidateEvaluation> chosen;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (labels[i] == labels[best]) chosen.push_back(pool[i]);
  return make_result(Strategy::smd_x_a2a, std::move(chosen));
}

SelectionResult select_pareto(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  const auto pool = require_eligible(cands, p, Strategy::pareto);
  std::vector<CandidateEvaluation> chosen;
  for (const auto& c : pool) {
    const bool dominated = std::any_of(pool.begin(), pool.end(), [&](const auto& o) {
      return o.smd <= c.smd && o.a2a <= c.a2a && (o.smd < c.smd || o.a2a < c.a2a);
    });
    if (!dominated) chosen.push_back(c);
  }
  return make_result(Strategy::pareto, std::move(chosen));
}

std::vector<SelectionResult> apply_all(std::span<const CandidateEvaluation> cands, const StrategyParams& p) {
  std::vector<SelectionResult> out;
  for (Strategy s : kAllStrategies) {
    if (cands.empty()) {
      SelectionResult r = make_result(s, {});
      r.notice = "no candidates";
      out.push_back(std::move(r));
      continue;
    }
    try {
      switch (s) {
        case Strategy::smd_threshold: out.push_back(select_smd_threshold(cands, p)); break;
        case Strategy::min_smd: out.push_back(select_min_smd(cands, p)); break;
        case Strategy::min_a2a: out.push_back(select_min_a2a(cands, p)); break;
        case Strategy::smd_x_a2a: out.push_back(select_smd_x_a2a(cands, p)); break;
        case Strategy::pareto: out.push_back(select_pareto(cands, p)); break;
      }
    } catch (const NoSelectionError& e) {
      SelectionResult r = make_result(s, {});
      r.notice = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace matchforge
