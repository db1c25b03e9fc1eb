#include "matchforge/tabular.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "matchforge/errors.hpp"

namespace matchforge {
namespace {

std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // Blank lines carry no record.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw ValidationError("stray quote inside unquoted CSV field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ValidationError("unterminated quoted CSV field");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::treatment: return "treatment";
    case ColumnKind::outcome: return "outcome";
  }
  return "continuous";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "continuous") return ColumnKind::continuous;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "treatment") return ColumnKind::treatment;
  if (text == "outcome") return ColumnKind::outcome;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

void validate_schema(std::span<const ColumnSchema> schema) {
  std::set<std::string> names;
  int treatments = 0;
  int outcomes = 0;
  for (const auto& c : schema) {
    if (!names.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    treatments += c.kind == ColumnKind::treatment;
    outcomes += c.kind == ColumnKind::outcome;
  }
  if (treatments != 1) throw SchemaError("schema needs exactly one treatment column");
  if (outcomes != 1) throw SchemaError("schema needs exactly one outcome column");
}

std::vector<ColumnSchema> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed schema JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  std::vector<ColumnSchema> schema;
  for (const auto& [name, kind] : j.items()) {
    if (!kind.is_string()) throw SchemaError("column kind for '" + name + "' must be a string");
    schema.push_back({name, parse_column_kind(kind.get<std::string>())});
  }
  validate_schema(schema);
  return schema;
}

void write_schema(std::span<const ColumnSchema> schema, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& c : schema) j[c.name] = std::string(to_string(c.kind));
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Dataset::Dataset(std::vector<ColumnSchema> columns, std::vector<Cell> cells)
    : columns_(std::move(columns)), cells_(std::move(cells)) {
  validate_schema(columns_);
  if (cells_.size() % columns_.size() != 0) throw ValidationError("ragged cell table");
  n_rows_ = cells_.size() / columns_.size();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].kind == ColumnKind::treatment) treatment_col_ = c;
    if (columns_[c].kind == ColumnKind::outcome) outcome_col_ = c;
  }
  for (std::size_t r = 0; r < n_rows_; ++r) {
    const Cell& t = at(r, treatment_col_);
    if (t.missing) throw ValidationError("row " + std::to_string(r) + " has no treatment value");
    if (t.number != 0.0 && t.number != 1.0)
      throw ValidationError("treatment value " + format_number(t.number) + " in row " +
                            std::to_string(r) + " is not binary");
    if (at(r, outcome_col_).missing)
      throw ValidationError("row " + std::to_string(r) + " has no outcome value");
  }
}

std::size_t Dataset::column_index(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return c;
  throw SchemaError("no column named '" + std::string(name) + "'");
}

std::size_t Dataset::missing_count() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.missing;
  return n;
}

Dataset parse_csv(std::string_view text, std::span<const ColumnSchema> schema) {
  validate_schema(schema);
  const auto records = parse_records(text);
  if (records.empty()) throw SchemaError("CSV has no header row");
  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(trim(header[i]), i);

  std::vector<std::size_t> source(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = position.find(schema[c].name);
    if (it == position.end()) throw SchemaError("CSV is missing column '" + schema[c].name + "'");
    source[c] = it->second;
  }

  std::vector<Cell> cells;
  cells.reserve((records.size() - 1) * schema.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      throw ValidationError("CSV line " + std::to_string(r + 1) + " has " +
                            std::to_string(rec.size()) + " fields, header has " +
                            std::to_string(header.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::string& raw = rec[source[c]];
      if (trim(raw).empty()) {
        cells.push_back(Cell::absent());
        continue;
      }
      const ColumnKind kind = schema[c].kind;
      if (kind == ColumnKind::categorical) {
        cells.push_back(Cell::category(trim(raw)));
        continue;
      }
      double v = 0.0;
      if (!parse_double(raw, v)) {
        const std::string t = trim(raw);
        if (kind == ColumnKind::treatment && (t == "true" || t == "True" || t == "TRUE")) v = 1.0;
        else if (kind == ColumnKind::treatment && (t == "false" || t == "False" || t == "FALSE")) v = 0.0;
        else
          throw ValidationError("non-numeric value '" + t + "' in column '" + schema[c].name +
                                "' at line " + std::to_string(r + 1));
      }
      if (!std::isfinite(v))
        throw ValidationError("non-finite value in column '" + schema[c].name + "'");
      cells.push_back(Cell::numeric(v));
    }
  }
  return Dataset({schema.begin(), schema.end()}, std::move(cells));
}

Dataset load_csv(const std::filesystem::path& path, std::span<const ColumnSchema> schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const auto& cols = d.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << csv_escape(cols[c].name);
  out << '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      const Cell& cell = d.at(r, c);
      if (cell.missing) continue;
      if (cols[c].kind == ColumnKind::categorical) out << csv_escape(cell.label);
      else if (cols[c].kind == ColumnKind::treatment) out << (cell.number != 0.0 ? 1 : 0);
      else out << format_number(cell.number);
    }
    out << '\n';
  }
}

Dataset impute(const Dataset& d) {
  const auto& cols = d.columns();
  std::vector<Cell> cells = d.cells();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].kind == ColumnKind::continuous) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < d.n_rows(); ++r) {
        if (!d.at(r, c).missing) {
          sum += d.at(r, c).number;
          ++n;
        }
      }
      if (n == 0) throw UnimputableError("column '" + cols[c].name + "' has no observed value");
      const double mean = sum / static_cast<double>(n);
      for (std::size_t r = 0; r < d.n_rows(); ++r)
        if (cells[r * cols.size() + c].missing) cells[r * cols.size() + c] = Cell::numeric(mean);
    } else if (cols[c].kind == ColumnKind::categorical) {
      std::map<std::string, std::size_t> counts;
      for (std::size_t r = 0; r < d.n_rows(); ++r)
        if (!d.at(r, c).missing) ++counts[d.at(r, c).label];
      if (counts.empty()) throw UnimputableError("column '" + cols[c].name + "' has no observed value");
      auto mode = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > mode->second) mode = it;
      for (std::size_t r = 0; r < d.n_rows(); ++r)
        if (cells[r * cols.size() + c].missing) cells[r * cols.size() + c] = Cell::category(mode->first);
    }
  }
  return d.with_cells(std::move(cells));
}

Covariates Covariates::subset(std::span<const std::size_t> rows) const {
  Covariates out;
  out.continuous_names = continuous_names;
  out.categorical_names = categorical_names;
  out.categorical_levels = categorical_levels;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.continuous.resize(n, continuous.cols());
  out.categorical.resize(n, categorical.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    out.continuous.row(i) = continuous.row(r);
    out.categorical.row(i) = categorical.row(r);
  }
  return out;
}

DesignMatrix DesignMatrix::subset(std::span<const std::size_t> rows) const {
  DesignMatrix out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, features.cols());
  out.outcome.resize(n);
  out.treatment.resize(rows.size());
  out.group_index.resize(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t r = rows[static_cast<std::size_t>(i)];
    out.features.row(i) = features.row(static_cast<Eigen::Index>(r));
    out.outcome(i) = outcome(static_cast<Eigen::Index>(r));
    out.treatment[static_cast<std::size_t>(i)] = treatment[r];
    out.group_index[static_cast<std::size_t>(i)] = group_index[r];
  }
  out.feature_names = feature_names;
  out.raw = raw.subset(rows);
  out.center = center;
  out.scale = scale;
  out.warnings = warnings;
  return out;
}

DesignMatrix encode(const Dataset& d) {
  if (d.missing_count() > 0) throw ValidationError("encode needs an imputed dataset");
  const auto& cols = d.columns();
  const std::size_t n = d.n_rows();
  const auto rows = static_cast<Eigen::Index>(n);

  std::vector<std::size_t> cont, cat;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].kind == ColumnKind::continuous) cont.push_back(c);
    if (cols[c].kind == ColumnKind::categorical) cat.push_back(c);
  }

  DesignMatrix m;
  m.raw.continuous.resize(rows, static_cast<Eigen::Index>(cont.size()));
  m.raw.categorical.resize(rows, static_cast<Eigen::Index>(cat.size()));
  for (std::size_t j = 0; j < cont.size(); ++j) {
    m.raw.continuous_names.push_back(cols[cont[j]].name);
    for (std::size_t r = 0; r < n; ++r)
      m.raw.continuous(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = d.at(r, cont[j]).number;
  }
  std::size_t one_hot_width = 0;
  for (std::size_t j = 0; j < cat.size(); ++j) {
    std::set<std::string> levels;
    for (std::size_t r = 0; r < n; ++r) levels.insert(d.at(r, cat[j]).label);
    std::vector<std::string> ordered(levels.begin(), levels.end());
    std::map<std::string, int> code;
    for (std::size_t l = 0; l < ordered.size(); ++l) code[ordered[l]] = static_cast<int>(l);
    for (std::size_t r = 0; r < n; ++r)
      m.raw.categorical(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = code[d.at(r, cat[j]).label];
    m.raw.categorical_names.push_back(cols[cat[j]].name);
    m.raw.categorical_levels.push_back(std::move(ordered));
    one_hot_width += m.raw.categorical_levels.back().size();
  }

  m.features = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(cont.size() + one_hot_width));
  for (std::size_t j = 0; j < cont.size(); ++j) {
    const auto col = m.raw.continuous.col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double var = n > 0 ? (col.array() - mean).square().sum() / static_cast<double>(n) : 0.0;
    const double sd = std::sqrt(var);
    m.center.push_back(mean);
    m.feature_names.push_back(cols[cont[j]].name);
    if (!(sd > 0.0)) {
      m.scale.push_back(0.0);
      m.warnings.push_back("continuous column '" + cols[cont[j]].name +
                           "' has zero variance; encoded as zeros");
      continue;
    }
    m.scale.push_back(sd);
    m.features.col(static_cast<Eigen::Index>(j)) = (col.array() - mean) / sd;
  }
  Eigen::Index offset = static_cast<Eigen::Index>(cont.size());
  for (std::size_t j = 0; j < cat.size(); ++j) {
    const auto& levels = m.raw.categorical_levels[j];
    for (const auto& l : levels) m.feature_names.push_back(m.raw.categorical_names[j] + "=" + l);
    for (Eigen::Index r = 0; r < rows; ++r)
      m.features(r, offset + m.raw.categorical(r, static_cast<Eigen::Index>(j))) = 1.0;
    offset += static_cast<Eigen::Index>(levels.size());
  }

  m.treatment.resize(n);
  m.outcome.resize(rows);
  m.group_index.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    m.treatment[r] = d.at(r, d.treatment_column()).number != 0.0 ? 1 : 0;
    m.outcome(static_cast<Eigen::Index>(r)) = d.at(r, d.outcome_column()).number;
    m.group_index[r] = r;
  }
  return m;
}

Eigen::MatrixXd unstandardize(const DesignMatrix& m) {
  const auto k = static_cast<Eigen::Index>(m.center.size());
  Eigen::MatrixXd out(m.features.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    out.col(j) = (m.features.col(j).array() * m.scale[idx] + m.center[idx]).matrix();
  }
  return out;
}

ArmSplit split_by_treatment(std::span<const int> treatment) {
  ArmSplit s;
  for (std::size_t i = 0; i < treatment.size(); ++i) (treatment[i] ? s.treated : s.control).push_back(i);
  if (s.control.empty() || s.treated.empty())
    throw SingleArmError(s.control.empty() ? "no control samples" : "no treated samples");
  return s;
}

ArmSplit split_by_treatment(const DesignMatrix& m) { return split_by_treatment(m.treatment); }

}  // namespace matchforge
