#pragma once

#include <span>
#include <string>
#include <vector>

#include "smokerisk/table.hpp"

namespace smokerisk {

struct CorrMatrix {
  std::vector<std::string> names;
  Matrix r;  // symmetric, diagonal 1, NaN where undefined

  std::string to_csv() const;
  nlohmann::json to_heatmap_json() const;  // flat (feature_a, feature_b, r) records
};

// Pairwise-complete Pearson correlations over the named columns.
CorrMatrix pearson_matrix(const Table& t, const std::vector<std::string>& columns);

struct TTestResult {
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
};

// Two-sided paired t-test. Zero-variance differences degenerate to
// t = +-inf / p = 0 (nonzero mean) or t = 0 / p = 1 (identical inputs).
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct Interval {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

// t-distribution confidence interval for the mean; requires n >= 2.
Interval mean_ci(std::span<const double> scores, double level = 0.95);

// Numeric kernels (exposed for tests).
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

}  // namespace smokerisk
