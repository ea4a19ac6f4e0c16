#pragma once

#include <span>
#include <string>
#include <vector>

#include "smokerisk/common.hpp"

namespace smokerisk {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;
  std::size_t total() const { return tp + fp + tn + fn; }
};

// score >= threshold predicts positive.
ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold);

// NaN marks a metric whose denominator was zero (e.g. precision with no
// positive predictions).
struct MetricSet {
  double accuracy = 0, sensitivity = 0, specificity = 0, precision = 0;
  double f1 = 0, g_mean = 0, auc_roc = 0, auc_pr = 0;

  static const std::vector<std::string>& names();
  double get(const std::string& name) const;
};

MetricSet metric_set(std::span<const int> labels, std::span<const double> scores,
                     double threshold = 0.5);
MetricSet metrics_from_confusion(const ConfusionMatrix& cm);

double f1_of(double precision, double recall);
double g_mean_of(double sensitivity, double specificity);

// Trapezoidal ROC area; ties between positive and negative scores receive
// half credit, matching the Mann-Whitney pair statistic.
double auc_roc(std::span<const int> labels, std::span<const double> scores);
// Step integration of the precision-recall curve.
double auc_pr(std::span<const int> labels, std::span<const double> scores);

struct CurvePoint {
  double x = 0, y = 0;     // ROC: (fpr, tpr); PR: (recall, precision)
  double threshold = 0;
};

std::vector<CurvePoint> roc_curve(std::span<const int> labels, std::span<const double> scores);
std::vector<CurvePoint> pr_curve(std::span<const int> labels, std::span<const double> scores);
std::string curve_to_csv(const std::vector<CurvePoint>& curve, const std::string& x_name,
                         const std::string& y_name);

}  // namespace smokerisk
