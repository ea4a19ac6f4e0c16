#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smokerisk/ensemble.hpp"
#include "smokerisk/linear.hpp"
#include "smokerisk/metrics.hpp"
#include "smokerisk/preprocess.hpp"
#include "smokerisk/resample.hpp"
#include "smokerisk/stats.hpp"
#include "smokerisk/table.hpp"

namespace smokerisk {

struct FoldAssignment {
  std::vector<int> fold_of;  // per row, in [0, k)
  int k = 0;
};

// Per-class round-robin after a seeded shuffle; the fold counter continues
// across classes so every fold count stays within 1 of the stratified ideal.
// A class smaller than k is an error unless allow_small_classes is set
// (set it for leave-one-out-style partitions).
FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                                bool allow_small_classes = false);

enum class ModelKind { Forest, GbdtExact, GbdtHistogram, Logistic, LinearSvm };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

enum class TrainResampling { None, Oversample, Undersample, Smote };

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Forest;
  FitConfig fit;
  LinearFitConfig linear;
  WeightMode weighting = WeightMode::None;
  TrainResampling resampling = TrainResampling::None;
  SmoteConfig smote;
};

struct MetricAggregate {
  double mean = 0.0;
  double sd = 0.0;
  Interval ci;
  std::size_t n_defined = 0;  // folds where the metric was defined
};

struct PairwiseComparison {
  std::string model_a, model_b;
  TTestResult test;  // on fold AUC-ROC
};

struct CVReport {
  int k = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::vector<std::string> model_names;
  std::vector<std::vector<MetricSet>> per_fold;  // [model][fold]
  std::map<std::string, std::map<std::string, MetricAggregate>> aggregates;  // model -> metric
  std::vector<PairwiseComparison> pairwise;
  // pooled out-of-fold scores, for ROC/PR curve emission
  std::vector<std::vector<double>> oof_scores;  // [model][row]
  std::vector<int> oof_labels;

  nlohmann::json to_json() const;
  std::string to_flat_csv() const;  // model,fold,metric,value
};

struct CVOptions {
  double threshold = 0.5;
  int threads = 1;
  bool impute = true;
  bool standardize = true;
  bool keep_oof_scores = true;
};

// Stratified k-fold evaluation with per-fold preprocessing (impute and scaler
// parameters are fit on the training fold only). All models see identical
// folds; pairwise paired t-tests run on matched fold AUC-ROC scores.
CVReport cross_validate(const Table& t, const std::vector<ModelSpec>& specs, int k,
                        std::uint64_t seed, const CVOptions& opts = {});

struct WeightingImpact {
  CVReport weighted;
  CVReport unweighted;
  std::map<std::string, double> delta;  // metric -> mean(weighted) - mean(unweighted)
  nlohmann::json to_json() const;
};

// Random Forest with vs. without inverse-frequency class weighting on
// identical folds.
WeightingImpact weighting_impact_study(const Table& t, const FitConfig& forest_cfg, int k,
                                       std::uint64_t seed, const CVOptions& opts = {});

// Single train/test holdout split (stratified), kept alongside CV.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    std::span<const int> labels, double test_fraction, std::uint64_t seed);

// Fits one model spec on a full (already preprocessed) modeling input.
struct FittedModel {
  ModelKind kind;
  std::optional<EnsembleModel> ensemble;
  std::optional<LinearModel> linear;
  std::vector<double> predict_proba(const Matrix& X, int threads = 1) const;
  nlohmann::json to_json() const;
};

FittedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                      const std::vector<std::string>& feature_names, std::uint64_t seed,
                      int threads);

}  // namespace smokerisk
