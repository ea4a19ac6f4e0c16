#include "smokerisk/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace smokerisk {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// =============================================================================
// Regularized incomplete beta via Lentz continued fraction
// =============================================================================

namespace {

double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (std::isnan(t)) return kNaN;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  double x = df / (df + t * t);
  double p = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t > 0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double df) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p == 0.5) return 0.0;
  // Bisection on the CDF; plenty accurate for report-grade quantiles.
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// =============================================================================
// Pearson correlation matrix (pairwise-complete deletion)
// =============================================================================

CorrMatrix pearson_matrix(const Table& t, const std::vector<std::string>& columns) {
  std::vector<std::size_t> idx;
  for (const auto& name : columns) {
    int c = t.schema.index_of(name);
    if (c < 0) throw DataError("pearson_matrix: unknown column '" + name + "'");
    idx.push_back(static_cast<std::size_t>(c));
  }
  const std::size_t m = idx.size();
  CorrMatrix out;
  out.names = columns;
  out.r = Matrix(m, m, kNaN);

  for (std::size_t i = 0; i < m; ++i) {
    out.r.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      std::size_t ci = idx[i], cj = idx[j];
      double sx = 0, sy = 0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.miss[ci][r] || t.miss[cj][r]) continue;
        sx += t.cols[ci][r];
        sy += t.cols[cj][r];
        ++n;
      }
      if (n < 2) {
        continue;  // undefined
      }
      double mx = sx / n, my = sy / n;
      double sxx = 0, syy = 0, sxy = 0;
      for (std::size_t r = 0; r < t.n_rows; ++r) {
        if (t.miss[ci][r] || t.miss[cj][r]) continue;
        double dx = t.cols[ci][r] - mx;
        double dy = t.cols[cj][r] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
      }
      double denom = std::sqrt(sxx * syy);
      double r_ij = denom > 0 ? sxy / denom : kNaN;
      if (r_ij > 1.0) r_ij = 1.0;
      if (r_ij < -1.0) r_ij = -1.0;
      out.r.at(i, j) = r_ij;
      out.r.at(j, i) = r_ij;
    }
  }
  return out;
}

std::string CorrMatrix::to_csv() const {
  std::ostringstream out;
  out << "feature";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      out << ',';
      double v = r.at(i, j);
      if (!std::isnan(v)) out << format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json CorrMatrix::to_heatmap_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      double v = r.at(i, j);
      pairs.push_back({{"feature_a", names[i]},
                       {"feature_b", names[j]},
                       {"r", std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v)}});
    }
  }
  return nlohmann::json{{"method", "pearson"},
                        {"missing_handling", "pairwise deletion"},
                        {"pairs", pairs}};
}

// =============================================================================
// Paired t-test and confidence intervals
// =============================================================================

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired_t_test: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("paired_t_test: need at least 2 pairs");

  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] - b[i];
  double mean_d = sum / n;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean_d;
    ss += d * d;
  }
  double sd = std::sqrt(ss / (n - 1));

  TTestResult res;
  res.mean_difference = mean_d;
  res.df = n - 1;
  if (sd == 0.0) {
    if (mean_d == 0.0) {
      res.t_statistic = 0.0;
      res.p_value = 1.0;
    } else {
      res.t_statistic = mean_d > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
      res.p_value = 0.0;
    }
    return res;
  }
  res.t_statistic = mean_d / (sd / std::sqrt(static_cast<double>(n)));
  res.p_value = 2.0 * student_t_cdf(-std::fabs(res.t_statistic), static_cast<double>(res.df));
  return res;
}

Interval mean_ci(std::span<const double> scores, double level) {
  const std::size_t n = scores.size();
  if (n < 2) throw DataError("mean_ci: need at least 2 scores");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("mean_ci: level must be in (0,1)");

  double sum = 0;
  for (double v : scores) sum += v;
  double mean = sum / n;
  double ss = 0;
  for (double v : scores) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / (n - 1));

  double tq = student_t_quantile(0.5 * (1.0 + level), static_cast<double>(n - 1));
  double half = tq * sd / std::sqrt(static_cast<double>(n));
  return Interval{mean, sd, mean - half, mean + half, level};
}

}  // namespace smokerisk
