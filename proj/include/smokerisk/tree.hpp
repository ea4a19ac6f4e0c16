#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smokerisk/common.hpp"
#include "smokerisk/resample.hpp"

#include <json.hpp>

namespace smokerisk {

// Shared learner configuration. Counts must be >= 1, fractions in (0,1],
// learning_rate > 0, l2_leaf_penalty >= 0.
struct FitConfig {
  int n_trees = 300;
  int max_depth = -1;  // -1 = unlimited
  int min_samples_leaf = 1;
  double feature_subsample = 0.0;  // 0 = auto: sqrt(m)/m for forests, all features otherwise
  double learning_rate = 0.1;
  double l2_leaf_penalty = 1.0;
  int n_bins = 255;
  WeightMap class_weights;
  std::uint64_t seed = 0;
  bool bootstrap = true;

  void validate() const;
  nlohmann::json to_json() const;
  static FitConfig from_json(const nlohmann::json& j);
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;           // leaf payload: class fraction or boosting weight
  double weighted_count = 0.0;  // training weight reaching this node (TreeSHAP cover)

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0

  // x <= threshold goes left.
  double predict_row(const double* x) const;
  int depth() const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

// CART with weighted Gini impurity. Split thresholds sit at midpoints between
// consecutive distinct values; equal-gain ties resolve to the lowest feature
// index, then the lowest threshold. Leaf value is the weighted positive
// fraction. When `importance` is non-null, each split adds its weighted
// impurity decrease to importance[feature].
Tree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> sample_weights,
              const FitConfig& cfg, std::uint64_t seed, std::vector<double>* importance = nullptr);

}  // namespace smokerisk
