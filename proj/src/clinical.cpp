#include "smokerisk/clinical.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace smokerisk {

std::string to_string(RiskLevel level) {
  switch (level) {
    case RiskLevel::Low: return "low";
    case RiskLevel::Moderate: return "moderate";
    case RiskLevel::High: return "high";
  }
  return "low";
}

int BandTable::points_for(double v) const {
  for (const auto& [upper, pts] : bands) {
    if (v < upper) return pts;
  }
  return bands.back().second;
}

namespace {

BandTable band_from_json(const nlohmann::json& j) {
  BandTable t;
  for (const auto& band : j) {
    double upper = band.at("max").is_null() ? std::numeric_limits<double>::infinity()
                                            : band.at("max").get<double>();
    t.bands.emplace_back(upper, band.at("points").get<int>());
  }
  if (t.bands.empty()) throw ConfigError("framingham table: empty band list");
  for (std::size_t i = 1; i < t.bands.size(); ++i) {
    if (t.bands[i].first <= t.bands[i - 1].first) {
      throw ConfigError("framingham table: band bounds must increase");
    }
  }
  if (!std::isinf(t.bands.back().first)) {
    throw ConfigError("framingham table: last band must be unbounded (max = null)");
  }
  return t;
}

SexPointsTable sex_table_from_json(const nlohmann::json& j) {
  SexPointsTable t;
  t.age = band_from_json(j.at("age"));
  t.total_cholesterol = band_from_json(j.at("total_cholesterol"));
  t.hdl = band_from_json(j.at("hdl"));
  t.systolic_bp = band_from_json(j.at("systolic_bp"));
  t.smoker_points = j.at("smoker_points").get<int>();
  t.diabetic_points = j.at("diabetic_points").get<int>();
  t.moderate_min = j.at("categories").at("moderate_min").get<int>();
  t.high_min = j.at("categories").at("high_min").get<int>();
  if (t.high_min < t.moderate_min) {
    throw ConfigError("framingham table: high_min below moderate_min");
  }
  return t;
}

}  // namespace

FraminghamTable FraminghamTable::from_json(const nlohmann::json& j) {
  FraminghamTable t;
  t.male = sex_table_from_json(j.at("male"));
  t.female = sex_table_from_json(j.at("female"));
  t.age_min = j.at("age_range").at(0).get<double>();
  t.age_max = j.at("age_range").at(1).get<double>();
  t.source = j.value("source", std::string());
  t.version = j.value("version", 0);
  return t;
}

FraminghamTable FraminghamTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open framingham table: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("framingham table parse error: ") + e.what());
  }
  return from_json(j);
}

RiskCategory framingham_points(const FraminghamInput& input, const FraminghamTable& table) {
  if (input.age < table.age_min || input.age > table.age_max) {
    throw DataError("framingham_points: age " + format_double(input.age) +
                    " outside table range [" + format_double(table.age_min) + ", " +
                    format_double(table.age_max) + "]");
  }
  if (input.total_cholesterol <= 0 || input.hdl <= 0 || input.systolic_bp <= 0) {
    throw DataError("framingham_points: concentrations and pressure must be positive");
  }
  const SexPointsTable& t = input.sex == Sex::Male ? table.male : table.female;
  RiskCategory out;
  out.points = t.age.points_for(input.age) + t.total_cholesterol.points_for(input.total_cholesterol) +
               t.hdl.points_for(input.hdl) + t.systolic_bp.points_for(input.systolic_bp);
  if (input.smoker) out.points += t.smoker_points;
  if (input.diabetic) out.points += t.diabetic_points;

  if (out.points >= t.high_min) {
    out.category = RiskLevel::High;
  } else if (out.points >= t.moderate_min) {
    out.category = RiskLevel::Moderate;
  } else {
    out.category = RiskLevel::Low;
  }
  return out;
}

namespace {

struct FraminghamColumnIndices {
  std::size_t age, chol, hdl, sbp, smoking, sex, glucose;
};

FraminghamColumnIndices resolve_columns(const Table& t, const FraminghamColumns& cols) {
  auto need = [&](const std::string& name) -> std::size_t {
    int c = t.schema.index_of(name);
    if (c < 0) throw DataError("framingham: missing required column '" + name + "'");
    return static_cast<std::size_t>(c);
  };
  return {need(cols.age),      need(cols.total_cholesterol), need(cols.hdl),
          need(cols.systolic_bp), need(cols.smoking),        need(cols.sex),
          need(cols.fasting_glucose)};
}

bool row_input(const Table& t, std::size_t r, const FraminghamColumnIndices& ix,
               const FraminghamColumns& cols, FraminghamInput& input) {
  for (std::size_t c : {ix.age, ix.chol, ix.hdl, ix.sbp, ix.smoking, ix.sex, ix.glucose}) {
    if (t.is_missing(r, c)) return false;
  }
  input.age = t.value(r, ix.age);
  input.total_cholesterol = t.value(r, ix.chol);
  input.hdl = t.value(r, ix.hdl);
  input.systolic_bp = t.value(r, ix.sbp);
  input.smoker = t.value(r, ix.smoking) == 1.0;
  input.sex = t.value(r, ix.sex) == cols.male_code ? Sex::Male : Sex::Female;
  input.diabetic = t.value(r, ix.glucose) >= cols.diabetes_glucose_min;
  return true;
}

}  // namespace

FraminghamDistribution framingham_distribution(const Table& t, const FraminghamTable& table,
                                               const FraminghamColumns& cols) {
  auto ix = resolve_columns(t, cols);
  FraminghamDistribution dist;
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    FraminghamInput input;
    if (!row_input(t, r, ix, cols, input)) {
      ++dist.skipped_rows;
      continue;
    }
    RiskCategory cat = framingham_points(input, table);
    ++dist.counts[input.smoker ? 1 : 0][static_cast<int>(cat.category)];
  }
  return dist;
}

std::string FraminghamDistribution::to_csv() const {
  std::ostringstream out;
  out << "smoking,category,count\n";
  for (int s = 0; s < 2; ++s) {
    for (int c = 0; c < 3; ++c) {
      out << s << ',' << to_string(static_cast<RiskLevel>(c)) << ',' << counts[s][c] << '\n';
    }
  }
  return out.str();
}

std::string framingham_rows_csv(const Table& t, const FraminghamTable& table,
                                const FraminghamColumns& cols) {
  auto ix = resolve_columns(t, cols);
  std::ostringstream out;
  out << "row,points,category,smoking\n";
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    FraminghamInput input;
    if (!row_input(t, r, ix, cols, input)) continue;
    RiskCategory cat = framingham_points(input, table);
    out << r << ',' << cat.points << ',' << to_string(cat.category) << ','
        << (input.smoker ? 1 : 0) << '\n';
  }
  return out.str();
}

// =============================================================================
// Disease label rules
// =============================================================================

nlohmann::json DiseaseRule::to_json() const {
  nlohmann::json jp = nlohmann::json::array();
  for (const auto& p : predicates) {
    jp.push_back({{"feature", p.feature}, {"op", p.op}, {"threshold", p.threshold}});
  }
  std::string combine_s = combine == Combine::Any ? "any"
                          : combine == Combine::All ? "all"
                                                    : "at_least";
  return nlohmann::json{{"name", name},
                        {"predicates", jp},
                        {"combine", combine_s},
                        {"at_least", at_least},
                        {"predictors", predictor_features}};
}

DiseaseRule DiseaseRule::from_json(const nlohmann::json& j) {
  DiseaseRule r;
  r.name = j.at("name").get<std::string>();
  for (const auto& jp : j.at("predicates")) {
    DiseaseRule::Predicate p;
    p.feature = jp.at("feature").get<std::string>();
    p.op = jp.at("op").get<std::string>();
    if (p.op != ">=" && p.op != ">" && p.op != "<=" && p.op != "<") {
      throw ConfigError("disease rule '" + r.name + "': bad op '" + p.op + "'");
    }
    p.threshold = jp.at("threshold").get<double>();
    r.predicates.push_back(std::move(p));
  }
  std::string combine_s = j.value("combine", std::string("any"));
  if (combine_s == "any") {
    r.combine = Combine::Any;
  } else if (combine_s == "all") {
    r.combine = Combine::All;
  } else if (combine_s == "at_least") {
    r.combine = Combine::AtLeast;
  } else {
    throw ConfigError("disease rule '" + r.name + "': bad combine '" + combine_s + "'");
  }
  r.at_least = j.value("at_least", 1);
  r.predictor_features = j.at("predictors").get<std::vector<std::string>>();
  return r;
}

std::vector<DiseaseRule> load_disease_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open disease rules: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("disease rules parse error: ") + e.what());
  }
  std::vector<DiseaseRule> rules;
  for (const auto& jr : j.at("rules")) rules.push_back(DiseaseRule::from_json(jr));
  return rules;
}

std::vector<int> derive_disease_labels(const Table& t, const DiseaseRule& rule) {
  if (rule.predicates.empty()) throw ConfigError("disease rule '" + rule.name + "': no predicates");
  std::vector<std::size_t> cols;
  for (const auto& p : rule.predicates) {
    int c = t.schema.index_of(p.feature);
    if (c < 0) throw DataError("disease rule '" + rule.name + "': unknown feature '" + p.feature + "'");
    const auto& spec = t.schema.columns[c];
    if (spec.valid_range &&
        (p.threshold < spec.valid_range->first || p.threshold > spec.valid_range->second)) {
      throw ConfigError("disease rule '" + rule.name + "': threshold " +
                        format_double(p.threshold) + " outside valid range of '" + p.feature + "'");
    }
    cols.push_back(static_cast<std::size_t>(c));
  }

  std::vector<int> labels(t.n_rows, 0);
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    int met = 0;
    bool missing = false;
    for (std::size_t i = 0; i < rule.predicates.size(); ++i) {
      if (t.is_missing(r, cols[i])) {
        missing = true;
        break;
      }
      double v = t.value(r, cols[i]);
      const auto& p = rule.predicates[i];
      bool hit = (p.op == ">=" && v >= p.threshold) || (p.op == ">" && v > p.threshold) ||
                 (p.op == "<=" && v <= p.threshold) || (p.op == "<" && v < p.threshold);
      met += hit;
    }
    if (missing) continue;  // incomplete rows stay negative
    switch (rule.combine) {
      case DiseaseRule::Combine::Any: labels[r] = met >= 1; break;
      case DiseaseRule::Combine::All:
        labels[r] = met == static_cast<int>(rule.predicates.size());
        break;
      case DiseaseRule::Combine::AtLeast: labels[r] = met >= rule.at_least; break;
    }
  }
  return labels;
}

Table disease_model_table(const Table& t, const DiseaseRule& rule) {
  if (rule.predictor_features.empty()) {
    throw ConfigError("disease rule '" + rule.name + "': no predictor features");
  }
  auto labels = derive_disease_labels(t, rule);
  Table sub = t.select_columns(rule.predictor_features);
  // strip any inherited label designation from the predictors
  for (auto& c : sub.schema.columns) c.is_label = false;

  ColumnSpec label_spec;
  label_spec.name = "disease:" + rule.name;
  label_spec.kind = ColumnKind::Binary;
  label_spec.is_label = true;
  sub.schema.columns.push_back(label_spec);
  std::vector<double> vals(t.n_rows);
  for (std::size_t r = 0; r < t.n_rows; ++r) vals[r] = labels[r];
  sub.cols.push_back(std::move(vals));
  sub.miss.emplace_back(t.n_rows, 0);
  return sub;
}

}  // namespace smokerisk
