#include "smokerisk/table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

namespace smokerisk {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::Binary: return "binary";
    case ColumnKind::Ordinal: return "ordinal";
    case ColumnKind::Identifier: return "identifier";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "continuous") return ColumnKind::Continuous;
  if (s == "binary") return ColumnKind::Binary;
  if (s == "ordinal") return ColumnKind::Ordinal;
  if (s == "identifier") return ColumnKind::Identifier;
  throw ConfigError("unknown column kind: " + s);
}

// =============================================================================
// Schema
// =============================================================================

void Schema::validate() const {
  std::unordered_set<std::string> seen;
  int labels = 0;
  for (const auto& c : columns) {
    if (c.name.empty()) throw ConfigError("schema: empty column name");
    if (!seen.insert(c.name).second)
      throw ConfigError("schema: duplicate column name '" + c.name + "'");
    if (c.valid_range && c.valid_range->first > c.valid_range->second)
      throw ConfigError("schema: invalid range for '" + c.name + "'");
    if (c.is_label) ++labels;
  }
  if (labels > 1) throw ConfigError("schema: more than one label column");
}

int Schema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Schema::label_index() const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].is_label) return static_cast<int>(i);
  }
  return -1;
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["kind"] = to_string(c.kind);
    if (!c.unit.empty()) jc["unit"] = c.unit;
    if (c.valid_range) jc["range"] = {c.valid_range->first, c.valid_range->second};
    if (c.is_label) jc["label"] = true;
    if (!c.categories.empty()) {
      nlohmann::json cats = nlohmann::json::array();
      for (const auto& cat : c.categories) cats.push_back({{"value", cat.label}, {"code", cat.code}});
      jc["categories"] = cats;
    }
    cols.push_back(jc);
  }
  return nlohmann::json{{"columns", cols}};
}

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s;
  if (!j.contains("columns") || !j["columns"].is_array())
    throw ConfigError("schema json: missing 'columns' array");
  for (const auto& jc : j["columns"]) {
    ColumnSpec c;
    c.name = jc.at("name").get<std::string>();
    c.kind = column_kind_from_string(jc.value("kind", std::string("continuous")));
    c.unit = jc.value("unit", std::string());
    if (jc.contains("range")) {
      auto r = jc["range"];
      c.valid_range = std::make_pair(r.at(0).get<double>(), r.at(1).get<double>());
    }
    c.is_label = jc.value("label", false);
    if (jc.contains("categories")) {
      for (const auto& cat : jc["categories"]) {
        c.categories.push_back({cat.at("value").get<std::string>(), cat.at("code").get<double>()});
      }
    }
    s.columns.push_back(std::move(c));
  }
  s.validate();
  return s;
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema json parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

// =============================================================================
// Table
// =============================================================================

void Table::set_missing(std::size_t r, std::size_t c) {
  cols[c][r] = kNaN;
  miss[c][r] = 1;
}

Table Table::empty(const Schema& schema, std::size_t n_rows) {
  Table t;
  t.schema = schema;
  t.n_rows = n_rows;
  t.cols.assign(schema.columns.size(), std::vector<double>(n_rows, kNaN));
  t.miss.assign(schema.columns.size(), std::vector<std::uint8_t>(n_rows, 1));
  return t;
}

Table Table::select_rows(const std::vector<std::size_t>& row_indices) const {
  Table out = Table::empty(schema, row_indices.size());
  for (std::size_t c = 0; c < n_cols(); ++c) {
    for (std::size_t i = 0; i < row_indices.size(); ++i) {
      out.cols[c][i] = cols[c][row_indices[i]];
      out.miss[c][i] = miss[c][row_indices[i]];
    }
  }
  return out;
}

Table Table::select_columns(const std::vector<std::string>& names) const {
  std::unordered_set<std::string> keep(names.begin(), names.end());
  Table out;
  out.n_rows = n_rows;
  for (std::size_t c = 0; c < n_cols(); ++c) {
    if (!keep.count(schema.columns[c].name)) continue;
    out.schema.columns.push_back(schema.columns[c]);
    out.cols.push_back(cols[c]);
    out.miss.push_back(miss[c]);
  }
  for (const auto& n : names) {
    if (schema.index_of(n) < 0) throw DataError("select_columns: unknown column '" + n + "'");
  }
  return out;
}

void Table::append_row(const Table& src, std::size_t src_row) {
  if (src.n_cols() != n_cols()) throw DataError("append_row: column count mismatch");
  for (std::size_t c = 0; c < n_cols(); ++c) {
    cols[c].push_back(src.cols[c][src_row]);
    miss[c].push_back(src.miss[c][src_row]);
  }
  ++n_rows;
}

// =============================================================================
// CSV
// =============================================================================

namespace {

// RFC-4180-ish field splitter: quoted fields, doubled-quote escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

// A cell is either numeric or one of the column's declared category labels.
double parse_cell(const std::string& field, const ColumnSpec& spec, std::size_t row) {
  double v;
  if (parse_number(field, v)) return v;
  for (const auto& cat : spec.categories) {
    if (cat.label == field) return cat.code;
  }
  throw DataError("row " + std::to_string(row + 1) + ", column '" + spec.name +
                  "': cannot parse value '" + field + "'");
}

}  // namespace

Table load_csv(const std::string& path, const Schema& schema, PlausibilityMode mode,
               LoadReport* report) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty csv file: " + path);
  auto header = split_csv_line(line);

  // Header must be a permutation of the schema names.
  std::vector<int> col_of_field(header.size());
  std::vector<bool> seen(schema.columns.size(), false);
  for (std::size_t f = 0; f < header.size(); ++f) {
    int idx = schema.index_of(header[f]);
    if (idx < 0) throw DataError("csv header: unknown column '" + header[f] + "'");
    if (seen[idx]) throw DataError("csv header: duplicate column '" + header[f] + "'");
    seen[idx] = true;
    col_of_field[f] = idx;
  }
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (!seen[c]) throw DataError("csv header: missing column '" + schema.columns[c].name + "'");
  }

  Table t;
  t.schema = schema;
  t.cols.assign(schema.columns.size(), {});
  t.miss.assign(schema.columns.size(), {});

  LoadReport local;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(row + 1) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < fields.size(); ++f) {
      int c = col_of_field[f];
      if (fields[f].empty()) {
        t.cols[c].push_back(kNaN);
        t.miss[c].push_back(1);
        ++local.missing_cells;
      } else {
        double v = parse_cell(fields[f], schema.columns[c], row);
        t.cols[c].push_back(v);
        t.miss[c].push_back(0);
      }
    }
    ++row;
  }
  t.n_rows = row;

  // Plausibility screening against declared ranges.
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto& spec = schema.columns[c];
    if (!spec.valid_range) continue;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (t.miss[c][r]) continue;
      double v = t.cols[c][r];
      if (v < spec.valid_range->first || v > spec.valid_range->second) {
        local.out_of_range.push_back({r, spec.name, v});
        if (mode == PlausibilityMode::DropCell) {
          t.set_missing(r, c);
          ++local.missing_cells;
        }
      }
    }
  }
  if (mode == PlausibilityMode::Reject && !local.out_of_range.empty()) {
    std::ostringstream msg;
    msg << "plausibility check failed, " << local.out_of_range.size() << " cell(s) out of range:";
    std::size_t shown = std::min<std::size_t>(local.out_of_range.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& f = local.out_of_range[i];
      msg << " [row " << f.row + 1 << " " << f.column << "=" << format_double(f.value) << "]";
    }
    if (local.out_of_range.size() > shown) msg << " ...";
    throw DataError(msg.str());
  }

  local.n_rows = t.n_rows;
  if (report) *report = std::move(local);
  return t;
}

void write_csv(const Table& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open csv for writing: " + path);
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    if (c) out << ',';
    const auto& name = t.schema.columns[c].name;
    if (name.find(',') != std::string::npos || name.find('"') != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += (ch == '"') ? "\"\"" : std::string(1, ch);
      out << quoted << '"';
    } else {
      out << name;
    }
  }
  out << '\n';
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) out << ',';
      if (!t.is_missing(r, c)) out << format_double(t.value(r, c));
    }
    out << '\n';
  }
}

nlohmann::json LoadReport::to_json() const {
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& f : out_of_range) {
    flags.push_back({{"row", f.row}, {"column", f.column}, {"value", f.value}});
  }
  return nlohmann::json{{"n_rows", n_rows},
                        {"missing_cells", missing_cells},
                        {"out_of_range", flags}};
}

// =============================================================================
// Summary statistics
// =============================================================================

double percentile(std::vector<double> sorted_values, double p) {
  const std::size_t n = sorted_values.size();
  if (n == 0) return kNaN;
  if (n == 1) return sorted_values[0];
  double h = (static_cast<double>(n) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return sorted_values[n - 1];
  double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

SummaryStats summarize(const Table& t) {
  SummaryStats out;
  out.n_rows = t.n_rows;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    ColumnSummary s;
    s.name = t.schema.columns[c].name;
    std::vector<double> vals;
    vals.reserve(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (!t.miss[c][r]) vals.push_back(t.cols[c][r]);
    }
    s.missing_count = t.n_rows - vals.size();
    s.missing_rate = t.n_rows ? static_cast<double>(s.missing_count) / t.n_rows : 0.0;
    if (vals.empty()) {
      s.defined = false;
      s.mean = s.stddev = s.min = s.p25 = s.p50 = s.p75 = s.max = kNaN;
      out.columns.push_back(std::move(s));
      continue;
    }
    s.defined = true;
    std::sort(vals.begin(), vals.end());
    s.n_unique = 1;
    for (std::size_t i = 1; i < vals.size(); ++i) {
      if (vals[i] != vals[i - 1]) ++s.n_unique;
    }
    double sum = 0;
    for (double v : vals) sum += v;
    s.mean = sum / vals.size();
    double ss = 0;
    for (double v : vals) ss += (v - s.mean) * (v - s.mean);
    s.stddev = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
    s.min = vals.front();
    s.max = vals.back();
    s.p25 = percentile(vals, 0.25);
    s.p50 = percentile(vals, 0.50);
    s.p75 = percentile(vals, 0.75);
    out.columns.push_back(std::move(s));
  }
  return out;
}

namespace {
nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}
}  // namespace

nlohmann::json SummaryStats::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& s : columns) {
    cols.push_back({{"name", s.name},
                    {"n_unique", s.n_unique},
                    {"mean", num_or_null(s.mean)},
                    {"std", num_or_null(s.stddev)},
                    {"min", num_or_null(s.min)},
                    {"p25", num_or_null(s.p25)},
                    {"p50", num_or_null(s.p50)},
                    {"p75", num_or_null(s.p75)},
                    {"max", num_or_null(s.max)},
                    {"missing_count", s.missing_count},
                    {"missing_rate", s.missing_rate}});
  }
  return nlohmann::json{{"n_rows", n_rows}, {"columns", cols}};
}

std::string SummaryStats::to_csv() const {
  std::ostringstream out;
  out << "column,n_unique,mean,std,min,p25,p50,p75,max,missing_count,missing_rate\n";
  for (const auto& s : columns) {
    out << s.name << ',' << s.n_unique << ',';
    auto cell = [&](double v) { return s.defined ? format_double(v) : std::string(); };
    out << cell(s.mean) << ',' << cell(s.stddev) << ',' << cell(s.min) << ',' << cell(s.p25)
        << ',' << cell(s.p50) << ',' << cell(s.p75) << ',' << cell(s.max) << ','
        << s.missing_count << ',' << format_double(s.missing_rate) << '\n';
  }
  return out.str();
}

// =============================================================================
// Modeling view
// =============================================================================

namespace {
ModelInput build_input(const Table& t, const std::vector<std::size_t>& feature_cols) {
  int label = t.schema.label_index();
  if (label < 0) throw DataError("model input: schema designates no label column");

  ModelInput mi;
  mi.X = Matrix(t.n_rows, feature_cols.size());
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    std::size_t c = feature_cols[j];
    mi.feature_names.push_back(t.schema.columns[c].name);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (t.miss[c][r]) {
        throw DataError("model input: missing value in column '" + t.schema.columns[c].name +
                        "' row " + std::to_string(r + 1) + " (impute first)");
      }
      mi.X.at(r, j) = t.cols[c][r];
    }
  }
  mi.y.resize(t.n_rows);
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    if (t.miss[label][r]) throw DataError("model input: missing label in row " + std::to_string(r + 1));
    double v = t.cols[label][r];
    if (v != 0.0 && v != 1.0) {
      throw DataError("model input: label must be 0/1, found " + format_double(v) + " in row " +
                      std::to_string(r + 1));
    }
    mi.y[r] = static_cast<int>(v);
  }
  return mi;
}
}  // namespace

ModelInput make_model_input(const Table& t) {
  std::vector<std::size_t> feats;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto& spec = t.schema.columns[c];
    if (spec.kind == ColumnKind::Identifier || spec.is_label) continue;
    feats.push_back(c);
  }
  return build_input(t, feats);
}

ModelInput make_model_input(const Table& t, const std::vector<std::string>& feature_subset) {
  std::vector<std::size_t> feats;
  for (const auto& name : feature_subset) {
    int c = t.schema.index_of(name);
    if (c < 0) throw DataError("model input: unknown feature '" + name + "'");
    feats.push_back(static_cast<std::size_t>(c));
  }
  return build_input(t, feats);
}

}  // namespace smokerisk
