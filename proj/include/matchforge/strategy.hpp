#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace matchforge {

struct CandidateEvaluation {
  std::string pipeline_id;
  double smd = 0.0;  // aggregate SMD after matching
  double a2a = 0.0;
  double ate = 0.0;  // matched ATE on the real task
  bool smd_valid = false;
  bool overlap_valid = true;
};

enum class Strategy { smd_threshold, min_smd, min_a2a, smd_x_a2a, pareto };

inline constexpr Strategy kAllStrategies[] = {Strategy::smd_threshold, Strategy::min_smd, Strategy::min_a2a,
                                              Strategy::smd_x_a2a, Strategy::pareto};

std::string_view to_string(Strategy s);

struct SelectionResult {
  Strategy strategy = Strategy::smd_threshold;
  std::vector<std::string> selected;  // sorted by pipeline_id
  std::vector<double> selected_ates;  // aligned with selected
  double ate_range = 0.0;             // 0 for empty and single selections
  std::string notice;                 // set when the selection is empty
};

struct StrategyParams {
  double smd_threshold = 0.10;
  double eps = 0.15;  // in min-max normalised (smd, a2a) space
  std::size_t min_pts = 2;
};

// Marks smd_valid from the threshold (strict <).
void apply_threshold(std::span<CandidateEvaluation> cands, double threshold = 0.10);

SelectionResult select_smd_threshold(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});

// Throw NoSelectionError when no candidate is SMD-valid.
SelectionResult select_min_smd(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});
SelectionResult select_min_a2a(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});
SelectionResult select_smd_x_a2a(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});
SelectionResult select_pareto(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// DBSCAN with Euclidean distance after per-axis min-max normalisation (an
// axis with zero spread maps to 0). A point's neighbourhood includes itself.
// Labels are 0.. in order of discovery; -1 is noise.
std::vector<int> dbscan(std::span<const Point2> points, double eps, std::size_t min_pts);

// Every strategy; an empty SMD-valid set yields empty selections with a
// notice instead of an exception.
std::vector<SelectionResult> apply_all(std::span<const CandidateEvaluation> cands, const StrategyParams& p = {});

}  // namespace matchforge
