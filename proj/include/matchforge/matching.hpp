#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "matchforge/tabular.hpp"

namespace matchforge {

enum class MatchMethod { nearest, optimal };

std::string_view to_string(MatchMethod m);
MatchMethod parse_match_method(std::string_view text);

struct MatchPair {
  std::size_t large = 0;  // index into the larger population
  std::size_t small = 0;  // index into the smaller population
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

// One pair per smaller-population sample, sorted by `small`; no larger
// sample is used twice.
struct MatchResult {
  std::vector<MatchPair> pairs;
  MatchMethod method = MatchMethod::nearest;
  double total_distance = 0.0;
};

// Greedy 1:1 matching without replacement. Smaller-population samples are
// visited in descending value order (ties: lower index first); each takes the
// closest unused larger sample, ties going to the lower index.
MatchResult match_nearest(std::span<const double> values_large, std::span<const double> values_small);

// Minimum total |difference| over all injective assignments small -> large.
MatchResult match_optimal(std::span<const double> values_large, std::span<const double> values_small);

MatchResult match(MatchMethod method, std::span<const double> values_large,
                  std::span<const double> values_small);

// Sum of |large - small| over the pairs, accumulated in pair order.
double matching_cost(std::span<const double> values_large, std::span<const double> values_small,
                     std::span<const MatchPair> pairs);

struct MatchedPopulations {
  DesignMatrix large;
  DesignMatrix small;
};

// `large_rows` / `small_rows` map population indices back to rows of `d`.
// Both outputs are ordered by the pair list.
MatchedPopulations extract_matched(const DesignMatrix& d, std::span<const std::size_t> large_rows,
                                   std::span<const std::size_t> small_rows, const MatchResult& r);

}  // namespace matchforge
