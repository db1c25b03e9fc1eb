#include "matchforge/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

void check_sizes(std::span<const double> large, std::span<const double> small) {
  if (small.empty()) throw Error("matching needs a non-empty smaller population");
  if (large.size() < small.size()) throw Error("matching needs |large| >= |small|");
}

std::vector<std::size_t> sorted_order(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b] || (v[a] == v[b] && a < b);
  });
  return order;
}

MatchResult finish(std::vector<MatchPair> pairs, MatchMethod method, std::span<const double> large,
                   std::span<const double> small) {
  std::sort(pairs.begin(), pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.small < b.small; });
  MatchResult r;
  r.total_distance = matching_cost(large, small, pairs);
  r.pairs = std::move(pairs);
  r.method = method;
  return r;
}

}  // namespace

std::string_view to_string(MatchMethod m) { return m == MatchMethod::nearest ? "nearest" : "optimal"; }

MatchMethod parse_match_method(std::string_view text) {
  if (text == "nearest") return MatchMethod::nearest;
  if (text == "optimal") return MatchMethod::optimal;
  throw Error("unknown matcher '" + std::string(text) + "'");
}

double matching_cost(std::span<const double> values_large, std::span<const double> values_small,
                     std::span<const MatchPair> pairs) {
  double total = 0.0;
  for (const auto& p : pairs) total += std::abs(values_large[p.large] - values_small[p.small]);
  return total;
}

MatchResult match_nearest(std::span<const double> values_large, std::span<const double> values_small) {
  check_sizes(values_large, values_small);
  using Entry = std::pair<double, std::size_t>;
  std::set<Entry> available;
  for (std::size_t i = 0; i < values_large.size(); ++i) available.emplace(values_large[i], i);

  std::vector<std::size_t> order(values_small.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values_small[a] > values_small[b]; });

  std::vector<MatchPair> pairs;
  pairs.reserve(values_small.size());
  for (std::size_t s : order) {
    const double v = values_small[s];
    auto up = available.lower_bound({v, 0});
    auto best = available.end();
    if (up != available.end()) best = up;
    if (up != available.begin()) {
      // Lowest index among the entries sharing the predecessor's value.
      auto down = available.lower_bound({std::prev(up)->first, 0});
      if (best == available.end()) {
        best = down;
      } else {
        const double d_up = best->first - v;
        const double d_down = v - down->first;
        if (d_down < d_up || (d_down == d_up && down->second < best->second)) best = down;
      }
    }
    pairs.push_back({best->second, s});
    available.erase(best);
  }
  return finish(std::move(pairs), MatchMethod::nearest, values_large, values_small);
}

// For |x - y| costs some order-preserving assignment between the sorted
// smaller population and a subsequence of the sorted larger one is optimal,
// so a banded O(n_small * (n_large - n_small + 1)) DP over sorted values is
// exact.
MatchResult match_optimal(std::span<const double> values_large, std::span<const double> values_small) {
  check_sizes(values_large, values_small);
  const auto ls = sorted_order(values_large);
  const auto ss = sorted_order(values_small);
  const std::size_t n = ss.size();
  const std::size_t w = ls.size() - n + 1;

  // cost[k]: best cost for the first i small samples within the first i + k
  // large ones. take[i][k]: small i pairs with large i + k.
  std::vector<double> cost(w, 0.0);
  std::vector<unsigned char> take(n * w, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double s = values_small[ss[i - 1]];
    for (std::size_t k = 0; k < w; ++k) {
      const double with = cost[k] + std::abs(values_large[ls[i + k - 1]] - s);
      if (k == 0 || with <= cost[k - 1]) {
        cost[k] = with;
        take[(i - 1) * w + k] = 1;
      } else {
        cost[k] = cost[k - 1];
      }
    }
  }

  std::vector<MatchPair> pairs;
  pairs.reserve(n);
  std::size_t i = n, k = w - 1;
  while (i > 0) {
    if (take[(i - 1) * w + k]) {
      pairs.push_back({ls[i + k - 1], ss[i - 1]});
      --i;
    } else {
      --k;
    }
  }
  return finish(std::move(pairs), MatchMethod::optimal, values_large, values_small);
}

MatchResult match(MatchMethod method, std::span<const double> values_large,
                  std::span<const double> values_small) {
  return method == MatchMethod::nearest ? match_nearest(values_large, values_small)
                                        : match_optimal(values_large, values_small);
}

MatchedPopulations extract_matched(const DesignMatrix& d, std::span<const std::size_t> large_rows,
                                   std::span<const std::size_t> small_rows, const MatchResult& r) {
  if (r.pairs.empty()) throw Error("extract_matched needs a non-empty pair list");
  std::vector<std::size_t> lr, sr;
  lr.reserve(r.pairs.size());
  sr.reserve(r.pairs.size());
  for (const auto& p : r.pairs) {
    if (p.large >= large_rows.size() || p.small >= small_rows.size())
      throw Error("match pair index out of range");
    if (large_rows[p.large] >= d.rows() || small_rows[p.small] >= d.rows())
      throw Error("population row index out of range");
    lr.push_back(large_rows[p.large]);
    sr.push_back(small_rows[p.small]);
  }
  return {d.subset(lr), d.subset(sr)};
}

}  // namespace matchforge
