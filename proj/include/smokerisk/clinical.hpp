#pragma once

#include <array>
#include <string>
#include <vector>

#include "smokerisk/table.hpp"

namespace smokerisk {

enum class Sex { Male, Female };
enum class RiskLevel { Low = 0, Moderate = 1, High = 2 };

std::string to_string(RiskLevel level);

struct FraminghamInput {
  double age = 0;                // years
  double total_cholesterol = 0;  // mg/dL
  double hdl = 0;                // mg/dL
  double systolic_bp = 0;        // mmHg
  bool smoker = false;
  bool diabetic = false;
  Sex sex = Sex::Male;
};

struct RiskCategory {
  int points = 0;
  RiskLevel category = RiskLevel::Low;
};

// Band table: (upper bound, points) pairs; value v scores the first band with
// v < upper_bound, the last band is unbounded.
struct BandTable {
  std::vector<std::pair<double, int>> bands;
  int points_for(double v) const;
};

struct SexPointsTable {
  BandTable age, total_cholesterol, hdl, systolic_bp;
  int smoker_points = 0;
  int diabetic_points = 0;
  int moderate_min = 0;  // category cut-offs on total points
  int high_min = 0;
};

// Shipped as an auditable JSON data file (sex-specific point bands plus
// category cut-offs), versioned with its source citation.
struct FraminghamTable {
  SexPointsTable male, female;
  double age_min = 20, age_max = 85;
  std::string source;
  int version = 0;

  static FraminghamTable from_json(const nlohmann::json& j);
  static FraminghamTable load(const std::string& path);
};

RiskCategory framingham_points(const FraminghamInput& input, const FraminghamTable& table);

// Column names used to pull Framingham inputs out of a screening table.
// The diabetic flag derives from fasting glucose >= diabetes_glucose_min when
// no explicit flag column exists.
struct FraminghamColumns {
  std::string age = "age";
  std::string total_cholesterol = "Cholesterol";
  std::string hdl = "HDL";
  std::string systolic_bp = "systolic";
  std::string smoking = "smoking";
  std::string sex = "gender";
  double male_code = 1.0;
  std::string fasting_glucose = "fasting blood sugar";
  double diabetes_glucose_min = 126.0;
};

struct FraminghamDistribution {
  // [smoker 0/1][risk level]
  std::array<std::array<std::size_t, 3>, 2> counts{};
  std::size_t skipped_rows = 0;  // rows with missing inputs
  std::string to_csv() const;
};

FraminghamDistribution framingham_distribution(const Table& t, const FraminghamTable& table,
                                               const FraminghamColumns& cols = {});

// Per-row points/categories for plot data: (row, points, category, smoker).
std::string framingham_rows_csv(const Table& t, const FraminghamTable& table,
                                const FraminghamColumns& cols = {});

// =============================================================================
// Rule-derived disease labels
// =============================================================================

struct DiseaseRule {
  std::string name;
  struct Predicate {
    std::string feature;
    std::string op;  // ">=", ">", "<=", "<"
    double threshold = 0;
  };
  std::vector<Predicate> predicates;
  enum class Combine { Any, All, AtLeast };
  Combine combine = Combine::Any;
  int at_least = 1;
  std::vector<std::string> predictor_features;

  nlohmann::json to_json() const;
  static DiseaseRule from_json(const nlohmann::json& j);
};

std::vector<DiseaseRule> load_disease_rules(const std::string& path);

std::vector<int> derive_disease_labels(const Table& t, const DiseaseRule& rule);

// Sub-model table: the rule's predictor columns plus the derived label.
Table disease_model_table(const Table& t, const DiseaseRule& rule);

}  // namespace smokerisk
