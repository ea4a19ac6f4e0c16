#include "smokerisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace smokerisk {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw DataError("metrics: labels/scores length mismatch");
  if (labels.empty()) throw DataError("metrics: empty input");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("metrics: labels must be 0/1");
  }
}

// Indices sorted by descending score; groups of equal scores are handled as
// single threshold steps by the callers.
std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  return {pos, labels.size() - pos};
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold) {
  check_inputs(labels, scores);
  ConfusionMatrix cm;
  cm.threshold = threshold;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++cm.tp : ++cm.fn;
    } else {
      pred ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

double f1_of(double precision, double recall) {
  if (std::isnan(precision) || std::isnan(recall)) return kNaN;
  double denom = precision + recall;
  if (denom == 0.0) return kNaN;
  return 2.0 * precision * recall / denom;
}

double g_mean_of(double sensitivity, double specificity) {
  if (std::isnan(sensitivity) || std::isnan(specificity)) return kNaN;
  return std::sqrt(sensitivity * specificity);
}

MetricSet metrics_from_confusion(const ConfusionMatrix& cm) {
  MetricSet m;
  std::size_t n = cm.total();
  m.accuracy = n ? static_cast<double>(cm.tp + cm.tn) / n : kNaN;
  m.sensitivity = (cm.tp + cm.fn) ? static_cast<double>(cm.tp) / (cm.tp + cm.fn) : kNaN;
  m.specificity = (cm.tn + cm.fp) ? static_cast<double>(cm.tn) / (cm.tn + cm.fp) : kNaN;
  m.precision = (cm.tp + cm.fp) ? static_cast<double>(cm.tp) / (cm.tp + cm.fp) : kNaN;
  m.f1 = f1_of(m.precision, m.sensitivity);
  m.g_mean = g_mean_of(m.sensitivity, m.specificity);
  m.auc_roc = kNaN;
  m.auc_pr = kNaN;
  return m;
}

double auc_roc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_roc: both classes required");

  auto order = order_by_score_desc(scores);
  double area = 0;
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Advance over the whole tie group so tied pairs earn half credit.
    double s = scores[order[i]];
    double d_tp = 0, d_fp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) {
        ++d_tp;
      } else {
        ++d_fp;
      }
      ++i;
    }
    area += d_fp * (tp + 0.5 * d_tp);
    tp += d_tp;
    fp += d_fp;
  }
  return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_pr(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_pr: both classes required");

  auto order = order_by_score_desc(scores);
  double area = 0;
  double tp = 0, fp = 0, prev_recall = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    double recall = tp / static_cast<double>(n_pos);
    double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

MetricSet metric_set(std::span<const int> labels, std::span<const double> scores,
                     double threshold) {
  MetricSet m = metrics_from_confusion(confusion(labels, scores, threshold));
  m.auc_roc = auc_roc(labels, scores);
  m.auc_pr = auc_pr(labels, scores);
  return m;
}

const std::vector<std::string>& MetricSet::names() {
  static const std::vector<std::string> kNames = {"accuracy", "sensitivity", "specificity",
                                                  "precision", "f1",          "g_mean",
                                                  "auc_roc",  "auc_pr"};
  return kNames;
}

double MetricSet::get(const std::string& name) const {
  if (name == "accuracy") return accuracy;
  if (name == "sensitivity") return sensitivity;
  if (name == "specificity") return specificity;
  if (name == "precision") return precision;
  if (name == "f1") return f1;
  if (name == "g_mean") return g_mean;
  if (name == "auc_roc") return auc_roc;
  if (name == "auc_pr") return auc_pr;
  throw ConfigError("unknown metric: " + name);
}

std::vector<CurvePoint> roc_curve(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_curve: both classes required");

  auto order = order_by_score_desc(scores);
  std::vector<CurvePoint> curve;
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.push_back({fp / n_neg, tp / n_pos, s});
  }
  return curve;
}

std::vector<CurvePoint> pr_curve(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw DataError("pr_curve: both classes required");

  auto order = order_by_score_desc(scores);
  std::vector<CurvePoint> curve;
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.push_back({tp / n_pos, tp / (tp + fp), s});
  }
  return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve, const std::string& x_name,
                         const std::string& y_name) {
  std::ostringstream out;
  out << x_name << ',' << y_name << ",threshold\n";
  for (const auto& p : curve) {
    out << format_double(p.x) << ',' << format_double(p.y) << ',';
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << format_double(p.threshold);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace smokerisk
