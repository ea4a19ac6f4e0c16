#include "smokerisk/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smokerisk {

std::vector<double> WeightMap::per_sample(std::span<const int> labels) const {
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] == 1 ? w_pos : w_neg;
  return w;
}

WeightMap class_weights(std::span<const int> labels, WeightMode mode) {
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++n_pos;
    } else if (y == 0) {
      ++n_neg;
    } else {
      throw DataError("class_weights: labels must be 0/1");
    }
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("class_weights: both classes required");

  WeightMap w;
  double n = static_cast<double>(n_pos + n_neg);
  switch (mode) {
    case WeightMode::InverseFrequency:
      // w_c = n / (n_classes * n_c)
      w.w_pos = n / (2.0 * n_pos);
      w.w_neg = n / (2.0 * n_neg);
      w.positive_scale = w.w_pos / w.w_neg;
      break;
    case WeightMode::Ratio:
      w.positive_scale = static_cast<double>(n_neg) / static_cast<double>(n_pos);
      w.w_pos = w.positive_scale;
      w.w_neg = 1.0;
      break;
    case WeightMode::None:
      break;
  }
  return w;
}

// =============================================================================
// Random over/undersampling
// =============================================================================

Table random_resample(const Table& t, ResampleMode mode, std::uint64_t seed) {
  int label = t.schema.label_index();
  if (label < 0) throw DataError("random_resample: schema designates no label column");

  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    if (t.miss[label][r]) throw DataError("random_resample: missing label");
    (t.cols[label][r] == 1.0 ? pos : neg).push_back(r);
  }
  if (pos.empty() || neg.empty()) throw DataError("random_resample: both classes required");

  auto& minority = pos.size() <= neg.size() ? pos : neg;
  auto& majority = pos.size() <= neg.size() ? neg : pos;

  Rng rng(seed);
  std::vector<std::size_t> keep;
  if (mode == ResampleMode::Oversample) {
    keep.reserve(2 * majority.size());
    for (std::size_t r = 0; r < t.n_rows; ++r) keep.push_back(r);
    std::size_t deficit = majority.size() - minority.size();
    for (std::size_t i = 0; i < deficit; ++i) {
      keep.push_back(minority[rng.below(minority.size())]);
    }
  } else {
    // Drop majority rows at random; keep original row order.
    std::vector<std::size_t> sampled = majority;
    rng.shuffle(sampled);
    sampled.resize(minority.size());
    std::vector<std::uint8_t> retain(t.n_rows, 0);
    for (std::size_t r : minority) retain[r] = 1;
    for (std::size_t r : sampled) retain[r] = 1;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (retain[r]) keep.push_back(r);
    }
  }
  return t.select_rows(keep);
}

// =============================================================================
// NRSBoundary-SMOTE
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

// Indices of the k smallest entries of dist, excluding `self`.
std::vector<std::size_t> k_smallest(const std::vector<double>& dist, std::size_t self,
                                    std::size_t k) {
  std::vector<std::size_t> idx;
  idx.reserve(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (i != self) idx.push_back(i);
  }
  std::size_t kk = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });
  idx.resize(kk);
  return idx;
}

}  // namespace

std::vector<double> synthesize_point(std::span<const double> xi, std::span<const double> xj,
                                     double lambda) {
  std::vector<double> out(xi.size());
  for (std::size_t d = 0; d < xi.size(); ++d) out[d] = xi[d] + lambda * (xj[d] - xi[d]);
  return out;
}

SmoteResult nrs_boundary_smote(const Matrix& minority, const Matrix& majority,
                               const SmoteConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("smote: k must be >= 1");
  if (cfg.rate <= 0) throw ConfigError("smote: rate must be > 0");
  const std::size_t n_min = minority.rows;
  const std::size_t dims = minority.cols;
  if (n_min <= static_cast<std::size_t>(cfg.k)) {
    throw DataError("smote: need more than k minority samples");
  }
  if (majority.rows > 0 && majority.cols != dims) {
    throw DataError("smote: minority/majority dimensionality mismatch");
  }

  SmoteResult res;
  res.boundary.assign(n_min, 0);
  res.neighborhood_radius.assign(n_min, 0.0);

  // Per-point minority neighbor lists and boundary membership.
  std::vector<std::vector<std::size_t>> neighbors(n_min);
  for (std::size_t i = 0; i < n_min; ++i) {
    std::vector<double> dmin(n_min);
    for (std::size_t j = 0; j < n_min; ++j) dmin[j] = sq_dist(minority.row(i), minority.row(j), dims);
    neighbors[i] = k_smallest(dmin, i, static_cast<std::size_t>(cfg.k));

    double radius = 0;
    for (std::size_t j : neighbors[i]) radius += std::sqrt(dmin[j]);
    res.neighborhood_radius[i] = radius / neighbors[i].size();

    if (!cfg.nrs_boundary) {
      res.boundary[i] = 1;
      continue;
    }
    // Boundary test: a majority point strictly closer than the k-th minority
    // neighbor displaces it from the combined k-nearest set.
    double kth = dmin[neighbors[i].back()];
    for (std::size_t m = 0; m < majority.rows; ++m) {
      if (sq_dist(minority.row(i), majority.row(m), dims) < kth) {
        res.boundary[i] = 1;
        break;
      }
    }
  }

  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < n_min; ++i) {
    if (res.boundary[i]) donors.push_back(i);
  }
  if (donors.empty()) {
    // Cleanly separated data: fall back to plain SMOTE over all minority points.
    res.fell_back_to_plain = true;
    donors.resize(n_min);
    std::iota(donors.begin(), donors.end(), 0);
  }

  const std::size_t target = static_cast<std::size_t>(std::llround(cfg.rate * n_min));
  res.synthetic = Matrix(target, dims);
  // Per-draw derived sub-seeds keep parallel and serial generation identical.
  for (std::size_t s = 0; s < target; ++s) {
    Rng rng(derive_seed(cfg.seed, s));
    std::size_t i = donors[s % donors.size()];
    const auto& nbrs = neighbors[i];
    std::size_t j = nbrs[rng.below(nbrs.size())];
    double lambda = rng.next_real01();
    for (std::size_t d = 0; d < dims; ++d) {
      res.synthetic.at(s, d) =
          minority.at(i, d) + lambda * (minority.at(j, d) - minority.at(i, d));
    }
  }
  return res;
}

Matrix smote_augmented(const Matrix& minority, const SmoteResult& result) {
  Matrix out(minority.rows + result.synthetic.rows, minority.cols);
  std::copy(minority.data.begin(), minority.data.end(), out.data.begin());
  std::copy(result.synthetic.data.begin(), result.synthetic.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(minority.data.size()));
  return out;
}

}  // namespace smokerisk
