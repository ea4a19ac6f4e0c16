#pragma once

#include <span>
#include <string>
#include <vector>

#include "smokerisk/tree.hpp"

namespace smokerisk {

enum class EnsembleKind { Forest, Boosted };
enum class SplitSearch { Exact, Histogram };

struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::Forest;
  std::vector<Tree> trees;
  double learning_rate = 0.0;  // boosted only
  double base_score = 0.0;     // boosted only, log-odds
  std::vector<std::string> feature_names;
  std::vector<std::uint64_t> tree_seeds;   // forest bootstrap metadata
  std::vector<double> training_loss;       // boosted: per-round weighted log-loss

  // Boosted: base + lr * sum of tree outputs. Forest: mean tree probability
  // (raw == probability).
  double raw_score(const double* x) const;
  double proba(const double* x) const;
  std::vector<double> predict_proba(const Matrix& X, int threads = 1) const;

  nlohmann::json to_json() const;
  static EnsembleModel from_json(const nlohmann::json& j);
};

// Bagged CART forest: bootstrap per tree (with replacement, original size)
// and random feature subsets per split. Class weights fold into sample
// weights. Deterministic per seed, serial or parallel.
EnsembleModel fit_forest(const Matrix& X, std::span<const int> y, const FitConfig& cfg,
                         const std::vector<std::string>& feature_names = {}, int threads = 1,
                         std::vector<double>* importance = nullptr);

// Logistic-loss gradient boosting with second-order leaf values
// w = -G / (H + lambda). Exact mode scans presorted feature columns;
// histogram mode scans n_bins quantile bins.
EnsembleModel fit_gbdt(const Matrix& X, std::span<const int> y, const FitConfig& cfg,
                       SplitSearch search, const std::vector<std::string>& feature_names = {},
                       int threads = 1);

}  // namespace smokerisk
