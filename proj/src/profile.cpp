#include "smokerisk/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace smokerisk {

// =============================================================================
// Cyclic Jacobi eigendecomposition
// =============================================================================

void symmetric_eigen(const Matrix& A, std::vector<double>& values, Matrix& vectors) {
  const std::size_t n = A.rows;
  if (A.cols != n) throw DataError("symmetric_eigen: matrix must be square");
  Matrix a = A;
  // V accumulates rotations; starts as identity.
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  auto off_diag_norm = [&]() {
    double s = 0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) s += a.at(p, q) * a.at(p, q);
    }
    return std::sqrt(s);
  };

  double scale = 0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(a.at(i, i)));
  scale = std::max(scale, off_diag_norm());
  const double tol = std::max(scale, 1.0) * 1e-15;

  for (int sweep = 0; sweep < 100 && off_diag_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (std::fabs(apq) <= tol * 1e-2) continue;
        double app = a.at(p, p), aqq = a.at(q, q);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        for (std::size_t i = 0; i < n; ++i) {
          double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double api = a.at(p, i), aqi = a.at(q, i);
          a.at(p, i) = c * api - s * aqi;
          a.at(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });
  values.resize(n);
  vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    values[r] = a.at(order[r], order[r]);
    for (std::size_t i = 0; i < n; ++i) vectors.at(r, i) = v.at(i, order[r]);
  }
}

// =============================================================================
// PCA
// =============================================================================

PCAModel pca_fit(const Matrix& X, int n_components) {
  if (X.rows < 2) throw DataError("pca_fit: need at least 2 rows");
  const std::size_t m = X.cols;
  if (n_components < 1 || static_cast<std::size_t>(n_components) > m) {
    throw ConfigError("pca_fit: n_components must be in [1, n_features]");
  }

  PCAModel model;
  model.means.assign(m, 0.0);
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t f = 0; f < m; ++f) model.means[f] += X.at(r, f);
  }
  for (auto& v : model.means) v /= static_cast<double>(X.rows);

  Matrix cov(m, m, 0.0);
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t i = 0; i < m; ++i) {
      double di = X.at(r, i) - model.means[i];
      for (std::size_t j = i; j < m; ++j) {
        cov.at(i, j) += di * (X.at(r, j) - model.means[j]);
      }
    }
  }
  double denom = static_cast<double>(X.rows - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      cov.at(i, j) /= denom;
      cov.at(j, i) = cov.at(i, j);
    }
  }

  std::vector<double> values;
  Matrix vectors;
  symmetric_eigen(cov, values, vectors);

  double total = 0;
  for (double v : values) total += std::max(v, 0.0);

  model.components = Matrix(n_components, m);
  for (int c = 0; c < n_components; ++c) {
    // sign convention: largest-magnitude loading positive
    std::size_t arg = 0;
    for (std::size_t f = 1; f < m; ++f) {
      if (std::fabs(vectors.at(c, f)) > std::fabs(vectors.at(c, arg))) arg = f;
    }
    double sign = vectors.at(c, arg) < 0 ? -1.0 : 1.0;
    for (std::size_t f = 0; f < m; ++f) model.components.at(c, f) = sign * vectors.at(c, f);
    double ev = std::max(values[c], 0.0);
    model.explained_variance.push_back(ev);
    model.explained_ratio.push_back(total > 0 ? ev / total : 0.0);
  }
  return model;
}

Matrix pca_transform(const PCAModel& model, const Matrix& X) {
  const std::size_t m = model.means.size();
  if (X.cols != m) throw DataError("pca_transform: feature count mismatch");
  const std::size_t k = model.components.rows;
  Matrix scores(X.rows, k);
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0;
      for (std::size_t f = 0; f < m; ++f) {
        s += (X.at(r, f) - model.means[f]) * model.components.at(c, f);
      }
      scores.at(r, c) = s;
    }
  }
  return scores;
}

nlohmann::json PCAModel::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (std::size_t c = 0; c < components.rows; ++c) {
    comps.push_back(std::vector<double>(components.row(c), components.row(c) + components.cols));
  }
  return nlohmann::json{{"components", comps},
                        {"explained_variance", explained_variance},
                        {"explained_ratio", explained_ratio},
                        {"means", means}};
}

PCAModel PCAModel::from_json(const nlohmann::json& j) {
  PCAModel m;
  m.means = j.at("means").get<std::vector<double>>();
  m.explained_variance = j.at("explained_variance").get<std::vector<double>>();
  m.explained_ratio = j.at("explained_ratio").get<std::vector<double>>();
  auto comps = j.at("components");
  m.components = Matrix(comps.size(), m.means.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    auto row = comps[c].get<std::vector<double>>();
    std::copy(row.begin(), row.end(), m.components.row(c));
  }
  return m;
}

// =============================================================================
// K-Means
// =============================================================================

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

ClusterResult kmeans_single(const Matrix& X, int k, std::uint64_t seed) {
  const std::size_t n = X.rows;
  const std::size_t d = X.cols;
  Rng rng(seed);

  // k-means++ seeding
  Matrix centroids(k, d);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  std::copy_n(X.row(first), d, centroids.row(0));
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t r = 0; r < n; ++r) {
      min_d[r] = std::min(min_d[r], sq_dist(X.row(r), centroids.row(c - 1), d));
      total += min_d[r];
    }
    std::size_t chosen = 0;
    if (total > 0) {
      double target = rng.next_real01() * total;
      double acc = 0;
      for (std::size_t r = 0; r < n; ++r) {
        acc += min_d[r];
        if (acc >= target) {
          chosen = r;
          break;
        }
      }
    } else {
      chosen = rng.below(n);
    }
    std::copy_n(X.row(chosen), d, centroids.row(c));
  }

  ClusterResult res;
  res.k = k;
  res.assignment.assign(n, -1);

  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t r = 0; r < n; ++r) {
      int best = 0;
      double best_d = sq_dist(X.row(r), centroids.row(0), d);
      for (int c = 1; c < k; ++c) {
        double dist = sq_dist(X.row(r), centroids.row(c), d);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (res.assignment[r] != best) {
        res.assignment[r] = best;
        changed = true;
      }
      inertia += best_d;
    }
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    if (!changed) break;

    Matrix sums(k, d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      int c = res.assignment[r];
      ++counts[c];
      for (std::size_t f = 0; f < d; ++f) sums.at(c, f) += X.at(r, f);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an emptied cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1;
        for (std::size_t r = 0; r < n; ++r) {
          double dist = sq_dist(X.row(r), centroids.row(res.assignment[r]), d);
          if (dist > far_d) {
            far_d = dist;
            far = r;
          }
        }
        std::copy_n(X.row(far), d, centroids.row(c));
        continue;
      }
      for (std::size_t f = 0; f < d; ++f) centroids.at(c, f) = sums.at(c, f) / counts[c];
    }
  }
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace

ClusterResult kmeans(const Matrix& X, int k, std::uint64_t seed, int n_restarts, int threads) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > X.rows) throw DataError("kmeans: k exceeds row count");
  if (n_restarts < 1) throw ConfigError("kmeans: n_restarts must be >= 1");

  std::vector<ClusterResult> runs(n_restarts);
  parallel_for(static_cast<std::size_t>(n_restarts), threads, [&](std::size_t i) {
    runs[i] = kmeans_single(X, k, derive_seed(seed, i));
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].inertia < runs[best].inertia) best = i;
  }
  return runs[best];
}

}  // namespace smokerisk
