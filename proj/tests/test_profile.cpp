#include <doctest.h>

#include <cmath>

#include "smokerisk/profile.hpp"

using namespace smokerisk;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d, double scale = 1.0) {
  Matrix X(n, d);
  for (auto& v : X.data) v = (rng.next_real01() * 2 - 1) * scale;
  return X;
}

}  // namespace

TEST_CASE("jacobi eigensolver reconstructs a symmetric matrix") {
  Rng rng(3);
  const std::size_t n = 8;
  Matrix A(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      A.at(i, j) = rng.next_real01() * 2 - 1;
      A.at(j, i) = A.at(i, j);
    }
  }
  std::vector<double> values;
  Matrix vectors;
  symmetric_eigen(A, values, vectors);

  // A == V^T diag(values) V with rows of `vectors` as eigenvectors
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0;
      for (std::size_t k = 0; k < n; ++k) sum += vectors.at(k, i) * values[k] * vectors.at(k, j);
      CHECK(std::fabs(sum - A.at(i, j)) < 1e-9);
    }
  }
  // descending order
  for (std::size_t k = 1; k < n; ++k) CHECK(values[k] <= values[k - 1] + 1e-12);
}

TEST_CASE("points on a line: first component explains everything") {
  Rng rng(5);
  Matrix X(50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    double t = rng.next_real01() * 10;
    X.at(i, 0) = 2 * t + 1;
    X.at(i, 1) = -3 * t + 4;
  }
  PCAModel m = pca_fit(X, 2);
  CHECK(m.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.explained_ratio[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("isotropic data: ratios approximately equal") {
  Rng rng(7);
  Matrix X = random_matrix(rng, 4000, 3);
  PCAModel m = pca_fit(X, 3);
  for (int c = 0; c < 3; ++c) CHECK(m.explained_ratio[c] == doctest::Approx(1.0 / 3).epsilon(0.12));
}

TEST_CASE("pca components are orthonormal, scores uncorrelated, reconstruction exact") {
  Rng rng(9);
  const std::size_t d = 6;
  Matrix X = random_matrix(rng, 300, d);
  // stretch some directions
  for (std::size_t i = 0; i < X.rows; ++i) {
    X.at(i, 0) *= 4;
    X.at(i, 1) *= 2;
    X.at(i, 2) += 0.8 * X.at(i, 0);
  }
  PCAModel m = pca_fit(X, static_cast<int>(d));

  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double dot = 0;
      for (std::size_t f = 0; f < d; ++f) dot += m.components.at(a, f) * m.components.at(b, f);
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  }

  Matrix scores = pca_transform(m, X);
  // off-diagonal covariance of the scores < 1e-8
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      double ma = 0, mb = 0;
      for (std::size_t r = 0; r < scores.rows; ++r) {
        ma += scores.at(r, a);
        mb += scores.at(r, b);
      }
      ma /= scores.rows;
      mb /= scores.rows;
      double cov = 0;
      for (std::size_t r = 0; r < scores.rows; ++r) {
        cov += (scores.at(r, a) - ma) * (scores.at(r, b) - mb);
      }
      cov /= (scores.rows - 1);
      CHECK(std::fabs(cov) < 1e-8);
    }
  }

  // reconstruction with all components reproduces centered X
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t f = 0; f < d; ++f) {
      double rec = 0;
      for (std::size_t c = 0; c < d; ++c) rec += scores.at(r, c) * m.components.at(c, f);
      CHECK(std::fabs(rec - (X.at(r, f) - m.means[f])) < 1e-8);
    }
  }
}

TEST_CASE("pca sign convention: largest-magnitude loading positive") {
  Rng rng(11);
  Matrix X = random_matrix(rng, 200, 4);
  for (std::size_t i = 0; i < X.rows; ++i) X.at(i, 2) *= 5;
  PCAModel m = pca_fit(X, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t arg = 0;
    for (std::size_t f = 1; f < 4; ++f) {
      if (std::fabs(m.components.at(c, f)) > std::fabs(m.components.at(c, arg))) arg = f;
    }
    CHECK(m.components.at(c, arg) > 0);
  }
}

TEST_CASE("pca rejects degenerate inputs") {
  Matrix one(1, 3);
  CHECK_THROWS_AS(pca_fit(one, 1), DataError);
  Matrix ok(5, 3);
  CHECK_THROWS_AS(pca_fit(ok, 4), ConfigError);
}

TEST_CASE("pca json round-trip") {
  Rng rng(13);
  Matrix X = random_matrix(rng, 60, 3);
  PCAModel m = pca_fit(X, 2);
  PCAModel back = PCAModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back.means == m.means);
  CHECK(back.explained_ratio == m.explained_ratio);
  CHECK(back.components.data == m.components.data);
}

TEST_CASE("kmeans: k=1 gives column means and total scatter") {
  Rng rng(17);
  Matrix X = random_matrix(rng, 100, 2);
  ClusterResult res = kmeans(X, 1, 3, 1);
  double mean0 = 0, mean1 = 0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    mean0 += X.at(r, 0);
    mean1 += X.at(r, 1);
  }
  mean0 /= X.rows;
  mean1 /= X.rows;
  CHECK(res.centroids.at(0, 0) == doctest::Approx(mean0));
  CHECK(res.centroids.at(0, 1) == doctest::Approx(mean1));

  double scatter = 0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    scatter += (X.at(r, 0) - mean0) * (X.at(r, 0) - mean0) +
               (X.at(r, 1) - mean1) * (X.at(r, 1) - mean1);
  }
  CHECK(res.inertia == doctest::Approx(scatter).epsilon(1e-9));
}

TEST_CASE("kmeans: k = n drives inertia to zero") {
  Rng rng(19);
  Matrix X(12, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    X.at(i, 0) = static_cast<double>(i);  // distinct points
    X.at(i, 1) = rng.next_real01();
  }
  ClusterResult res = kmeans(X, 12, 5, 4);
  CHECK(res.inertia == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kmeans separates two well-separated blobs") {
  Rng rng(23);
  Matrix X(200, 2);
  std::vector<int> truth(200);
  for (std::size_t i = 0; i < 200; ++i) {
    truth[i] = i % 2;
    X.at(i, 0) = (truth[i] ? 100.0 : 0.0) + rng.next_real01();
    X.at(i, 1) = rng.next_real01();
  }
  ClusterResult res = kmeans(X, 2, 7, 3);
  // assignments match blob membership up to label swap
  std::size_t agree = 0;
  for (std::size_t i = 0; i < 200; ++i) agree += res.assignment[i] == truth[i];
  CHECK((agree == 200 || agree == 0));
}

TEST_CASE("kmeans inertia trace is non-increasing; assignments point to nearest centroid") {
  Rng rng(29);
  Matrix X = random_matrix(rng, 300, 3);
  ClusterResult res = kmeans(X, 4, 11, 1);
  for (std::size_t i = 1; i < res.inertia_trace.size(); ++i) {
    CHECK(res.inertia_trace[i] <= res.inertia_trace[i - 1] + 1e-9);
  }
  for (std::size_t r = 0; r < X.rows; ++r) {
    double assigned = 0, best = 1e300;
    for (int c = 0; c < 4; ++c) {
      double d = 0;
      for (std::size_t f = 0; f < 3; ++f) {
        double diff = X.at(r, f) - res.centroids.at(c, f);
        d += diff * diff;
      }
      if (c == res.assignment[r]) assigned = d;
      best = std::min(best, d);
    }
    CHECK(assigned == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("kmeans restarts are deterministic and never hurt") {
  Rng rng(31);
  Matrix X = random_matrix(rng, 150, 2);
  ClusterResult one = kmeans(X, 3, 13, 1);
  ClusterResult many = kmeans(X, 3, 13, 8, 4);
  ClusterResult many2 = kmeans(X, 3, 13, 8, 1);
  CHECK(many.inertia <= one.inertia + 1e-12);
  CHECK(many.inertia == doctest::Approx(many2.inertia).epsilon(1e-12));
  CHECK(many.assignment == many2.assignment);

  CHECK_THROWS_AS(kmeans(X, 0, 1, 1), ConfigError);
  CHECK_THROWS_AS(kmeans(X, 151, 1, 1), DataError);
}
