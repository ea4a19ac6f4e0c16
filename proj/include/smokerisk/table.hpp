#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smokerisk/common.hpp"

#include <json.hpp>

namespace smokerisk {

enum class ColumnKind { Continuous, Binary, Ordinal, Identifier };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

// Declared mapping from a CSV category label to its numeric code, in order
// (the order defines the ordinal ranking).
struct CategoryCode {
  std::string label;
  double code = 0.0;
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::string unit;  // empty = unitless
  std::optional<std::pair<double, double>> valid_range;
  bool is_label = false;
  std::vector<CategoryCode> categories;
};

struct Schema {
  std::vector<ColumnSpec> columns;

  void validate() const;
  int index_of(const std::string& name) const;  // -1 if absent
  int label_index() const;                      // -1 if none
  const ColumnSpec& spec(std::size_t i) const { return columns[i]; }

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::string& path);
};

enum class PlausibilityMode { Flag, DropCell, Reject };

struct CellFlag {
  std::size_t row = 0;  // 0-based data row (header excluded)
  std::string column;
  double value = 0.0;
};

struct LoadReport {
  std::size_t n_rows = 0;
  std::size_t missing_cells = 0;
  std::vector<CellFlag> out_of_range;
  nlohmann::json to_json() const;
};

// Columnar table. Missing cells carry NaN in `cols` and a set bit in `miss`;
// the mask is authoritative. Immutable by convention once built: operations
// return new tables.
class Table {
public:
  Schema schema;
  std::vector<std::vector<double>> cols;
  std::vector<std::vector<std::uint8_t>> miss;
  std::size_t n_rows = 0;

  std::size_t n_cols() const { return schema.columns.size(); }
  double value(std::size_t r, std::size_t c) const { return cols[c][r]; }
  bool is_missing(std::size_t r, std::size_t c) const { return miss[c][r] != 0; }

  void set_value(std::size_t r, std::size_t c, double v) {
    cols[c][r] = v;
    miss[c][r] = 0;
  }
  void set_missing(std::size_t r, std::size_t c);

  static Table empty(const Schema& schema, std::size_t n_rows);
  Table select_rows(const std::vector<std::size_t>& row_indices) const;
  Table select_columns(const std::vector<std::string>& names) const;
  void append_row(const Table& src, std::size_t src_row);
};

Table load_csv(const std::string& path, const Schema& schema,
               PlausibilityMode mode = PlausibilityMode::Flag,
               LoadReport* report = nullptr);
void write_csv(const Table& t, const std::string& path);

struct ColumnSummary {
  std::string name;
  std::size_t n_unique = 0;
  double mean = 0, stddev = 0;
  double min = 0, p25 = 0, p50 = 0, p75 = 0, max = 0;
  std::size_t missing_count = 0;
  double missing_rate = 0;
  bool defined = false;  // false when every value is missing
};

struct SummaryStats {
  std::size_t n_rows = 0;
  std::vector<ColumnSummary> columns;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

SummaryStats summarize(const Table& t);

// Type-7 percentile: linear interpolation between order statistics.
double percentile(std::vector<double> sorted_values, double p);

// Modeling view: feature matrix over non-identifier, non-label columns plus
// the binary label vector. Requires complete cells in the used columns.
struct ModelInput {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> feature_names;
};

ModelInput make_model_input(const Table& t);
ModelInput make_model_input(const Table& t, const std::vector<std::string>& feature_subset);

}  // namespace smokerisk
