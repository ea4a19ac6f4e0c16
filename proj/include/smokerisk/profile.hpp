#pragma once

#include <cstdint>
#include <vector>

#include "smokerisk/common.hpp"

#include <json.hpp>

namespace smokerisk {

struct PCAModel {
  Matrix components;  // n_components x n_features, orthonormal rows
  std::vector<double> explained_variance;  // descending eigenvalues
  std::vector<double> explained_ratio;     // eigenvalue / total variance
  std::vector<double> means;               // centering offsets

  nlohmann::json to_json() const;
  static PCAModel from_json(const nlohmann::json& j);
};

// Eigendecomposition of the sample covariance matrix (cyclic Jacobi).
// Components sort by descending eigenvalue; each component's sign is fixed so
// its largest-magnitude loading is positive.
PCAModel pca_fit(const Matrix& X, int n_components);
Matrix pca_transform(const PCAModel& model, const Matrix& X);

// Jacobi eigensolver for symmetric matrices, exposed for tests.
// Eigenvectors come back as rows of `vectors`, matching eigenvalue order.
void symmetric_eigen(const Matrix& A, std::vector<double>& values, Matrix& vectors);

struct ClusterResult {
  int k = 0;
  Matrix centroids;             // k x n_features
  std::vector<int> assignment;  // per row
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the winning restart
};

// k-means++ seeding, Lloyd iterations to an assignment fixed point (at most
// 300), best inertia over n_restarts. An emptied cluster re-seeds at the
// point farthest from its centroid.
ClusterResult kmeans(const Matrix& X, int k, std::uint64_t seed, int n_restarts = 1,
                     int threads = 1);

}  // namespace smokerisk
