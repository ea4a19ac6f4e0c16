#pragma once

#include <span>
#include <string>
#include <vector>

#include "smokerisk/common.hpp"
#include "smokerisk/resample.hpp"

#include <json.hpp>

namespace smokerisk {

enum class LinearKind { Logistic, LinearSvm };

struct LinearFitConfig {
  int max_iterations = 2000;
  double tol = 1e-8;        // stop when the loss change falls below this
  double step_size = 0.5;   // initial gradient step, halved on overshoot
  double l2 = 1e-4;         // ridge penalty on the weights (not the bias)
  int patience = 10;        // consecutive loss increases before giving up
  WeightMap class_weights;
};

struct LinearModel {
  LinearKind kind = LinearKind::Logistic;
  std::vector<double> weights;
  double bias = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  std::vector<std::string> feature_names;

  double decision(const double* x) const;
  // Logistic link for both kinds; SVM margins pass through it so scores are
  // comparable for AUC purposes.
  std::vector<double> predict_proba(const Matrix& X) const;

  nlohmann::json to_json() const;
  static LinearModel from_json(const nlohmann::json& j);
};

// Full-batch gradient descent on the weighted logistic loss. Expects
// standardized features.
LinearModel fit_logreg(const Matrix& X, std::span<const int> y, const LinearFitConfig& cfg,
                       const std::vector<std::string>& feature_names = {});

// Sub-gradient descent on the weighted hinge loss with L2 regularization.
LinearModel fit_linear_svm(const Matrix& X, std::span<const int> y, const LinearFitConfig& cfg,
                           const std::vector<std::string>& feature_names = {});

}  // namespace smokerisk
