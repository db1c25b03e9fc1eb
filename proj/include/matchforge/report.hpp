#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "matchforge/runner.hpp"

namespace matchforge {

inline constexpr const char* kVersion = "0.1.0";

// Deterministic JSON: no timestamps, host names or thread counts.
std::string run_report_json(const RunReport& r);
std::string run_report_markdown(const RunReport& r);

// report.json, report.md, candidates.csv (SMD vs A2A, plot ready),
// balance.csv (per feature) and a2a_bootstraps.csv.
void write_run_report(const RunReport& r, const std::filesystem::path& dir);

std::string confounder_table_csv(const std::vector<ConfounderRow>& rows);
std::string confounder_table_markdown(const std::vector<ConfounderRow>& rows);
std::string correlation_table_csv(const std::vector<CorrelationRow>& rows);
std::string correlation_table_markdown(const std::vector<CorrelationRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace matchforge
