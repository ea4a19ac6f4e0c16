#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "smokerisk/ensemble.hpp"

namespace smokerisk {

struct ShapVector {
  std::vector<double> values;  // one per model feature
  double base_value = 0.0;
};

// Exact Shapley values for the cover-weighted conditional-expectation game
// of a single tree ("tree path dependent" formulation). Requires
// weighted_count at every node.
ShapVector tree_shap(const Tree& tree, const double* x, std::size_t n_features);

// Ensemble attribution, consistent with the prediction combination: forests
// average per-tree values in probability space, boosted models sum them on
// the raw-score scale (times the learning rate, plus the base score).
ShapVector tree_shap(const EnsembleModel& model, const double* x);

// Cover-weighted expected leaf value of one tree.
double tree_expected_value(const Tree& tree);

struct ShapMatrix {
  Matrix values;  // rows x features
  double base_value = 0.0;
  std::vector<std::string> feature_names;
};

ShapMatrix shap_matrix(const EnsembleModel& model, const Matrix& X, int threads = 1);

struct ImportanceRanking {
  struct Item {
    std::string feature;
    double mean_abs_shap = 0.0;
    double cumulative_share = 0.0;
  };
  std::vector<Item> items;  // descending mean_abs_shap
};

ImportanceRanking rank_importance(const ShapMatrix& shap);

struct ShapSummary {
  ShapMatrix shap;
  ImportanceRanking ranking;
};

ShapSummary shap_summary(const EnsembleModel& model, const Matrix& X, int threads = 1);

// system -> member features; every ranked feature must appear exactly once.
struct SystemMap {
  std::vector<std::pair<std::string, std::vector<std::string>>> systems;
  static SystemMap from_json(const nlohmann::json& j);
  static SystemMap load(const std::string& path);
};

// Mean of member features' mean-|SHAP|, ordered descending.
std::vector<std::pair<std::string, double>> group_importance(const ImportanceRanking& ranking,
                                                             const SystemMap& map);

struct GridSpec {
  double min_a = 0, max_a = 1;
  int steps_a = 20;
  double min_b = 0, max_b = 1;
  int steps_b = 20;
};

struct DependenceGrid {
  std::string feature_a, feature_b;
  std::vector<double> axis_a, axis_b;
  Matrix mean_prediction;  // steps_a x steps_b
  std::string to_csv() const;
};

// Partial-dependence surface: mean model prediction over the dataset with the
// feature pair overridden to each grid cell.
DependenceGrid dependence_grid(const EnsembleModel& model, const Matrix& X, int feature_a,
                               int feature_b, const GridSpec& grid, int threads = 1);

}  // namespace smokerisk
