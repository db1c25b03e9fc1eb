#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace matchforge {

enum class ColumnKind { continuous, categorical, treatment, outcome };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
};

// Throws SchemaError unless names are unique and exactly one treatment and
// one outcome column are present.
void validate_schema(std::span<const ColumnSchema> schema);

// JSON object {column_name: "continuous"|"categorical"|"treatment"|"outcome"},
// column order as written in the file.
std::vector<ColumnSchema> load_schema(const std::filesystem::path& path);

struct Cell {
  double number = 0.0;  // continuous, treatment and outcome columns
  std::string label;    // categorical columns
  bool missing = false;

  static Cell numeric(double v) { return Cell{v, {}, false}; }
  static Cell category(std::string l) { return Cell{0.0, std::move(l), false}; }
  static Cell absent() { return Cell{0.0, {}, true}; }
};

// Row-major table. Treatment cells hold 0 or 1; treatment and outcome cells
// are never missing.
class Dataset {
 public:
  Dataset(std::vector<ColumnSchema> columns, std::vector<Cell> cells);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_columns() const noexcept { return columns_.size(); }
  const std::vector<ColumnSchema>& columns() const noexcept { return columns_; }
  const Cell& at(std::size_t row, std::size_t col) const {
    return cells_[row * columns_.size() + col];
  }
  std::size_t column_index(std::string_view name) const;
  std::size_t treatment_column() const noexcept { return treatment_col_; }
  std::size_t outcome_column() const noexcept { return outcome_col_; }
  std::size_t missing_count() const;

  Dataset with_cells(std::vector<Cell> cells) const { return Dataset(columns_, std::move(cells)); }
  const std::vector<Cell>& cells() const noexcept { return cells_; }

 private:
  std::vector<ColumnSchema> columns_;
  std::vector<Cell> cells_;
  std::size_t n_rows_ = 0;
  std::size_t treatment_col_ = 0;
  std::size_t outcome_col_ = 0;
};

// RFC-4180 CSV with a header row; empty field = missing. Columns not named in
// the schema are ignored.
Dataset load_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema);
Dataset parse_csv(std::string_view text, std::span<const ColumnSchema> schema);

// Writes the dataset back as CSV (header in schema order).
void write_csv(const Dataset& d, const std::filesystem::path& path);
void write_schema(std::span<const ColumnSchema> schema, const std::filesystem::path& path);

// Mean for continuous columns, mode for categorical ones (ties go to the
// lexicographically smallest label).
Dataset impute(const Dataset& d);

// Untransformed covariates, the scale balance diagnostics work on.
struct Covariates {
  std::vector<std::string> continuous_names;
  Eigen::MatrixXd continuous;  // rows = samples
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> categorical_levels;
  Eigen::MatrixXi categorical;  // level codes into categorical_levels

  std::size_t rows() const noexcept {
    return static_cast<std::size_t>(std::max(continuous.rows(), categorical.rows()));
  }
  Covariates subset(std::span<const std::size_t> rows) const;
};

struct DesignMatrix {
  Eigen::MatrixXd features;  // z-scored continuous, then one-hot blocks
  std::vector<std::string> feature_names;
  std::vector<int> treatment;
  Eigen::VectorXd outcome;
  std::vector<std::size_t> group_index;  // row in the source Dataset

  Covariates raw;
  // z = (x - center) / scale for the continuous block; scale 0 marks a
  // constant column encoded as zeros.
  std::vector<double> center;
  std::vector<double> scale;
  std::vector<std::string> warnings;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features.rows()); }

  // Rows in the given order; group_index follows the selected rows.
  DesignMatrix subset(std::span<const std::size_t> rows) const;
};

DesignMatrix encode(const Dataset& d);

// Reverses the z-scoring of the continuous block.
Eigen::MatrixXd unstandardize(const DesignMatrix& m);

struct ArmSplit {
  std::vector<std::size_t> control;  // X0
  std::vector<std::size_t> treated;  // X1
};

ArmSplit split_by_treatment(const DesignMatrix& m);
ArmSplit split_by_treatment(std::span<const int> treatment);

}  // namespace matchforge
