#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smokerisk/table.hpp"

namespace smokerisk {

struct WeightMap {
  double w_pos = 1.0;
  double w_neg = 1.0;
  double positive_scale = 1.0;  // n_neg / n_pos, for boosting-style weighting

  std::vector<double> per_sample(std::span<const int> labels) const;
};

enum class WeightMode { InverseFrequency, Ratio, None };

WeightMap class_weights(std::span<const int> labels, WeightMode mode);

enum class ResampleMode { Oversample, Undersample };

// Balances the label classes by duplicating minority rows (oversample) or
// dropping majority rows (undersample). Deterministic per seed.
Table random_resample(const Table& t, ResampleMode mode, std::uint64_t seed);

struct SmoteConfig {
  int k = 5;
  double rate = 1.0;  // |S_syn| = round(rate * |S_min|)
  std::uint64_t seed = 0;
  bool nrs_boundary = true;  // restrict donors to boundary minority points
};

struct SmoteResult {
  Matrix synthetic;
  std::vector<std::uint8_t> boundary;        // per minority point
  std::vector<double> neighborhood_radius;   // mean distance to k minority neighbors
  bool fell_back_to_plain = false;           // no boundary point qualified
};

// Boundary-restricted SMOTE: x_new = x_i + lambda * (x_j - x_i) with x_j one
// of x_i's k nearest minority neighbors and lambda ~ U(0,1). A minority point
// is boundary when any of its k nearest neighbors in the combined data is
// majority-class.
SmoteResult nrs_boundary_smote(const Matrix& minority, const Matrix& majority,
                               const SmoteConfig& cfg);

std::vector<double> synthesize_point(std::span<const double> xi, std::span<const double> xj,
                                     double lambda);

// S_min with the synthetic rows appended.
Matrix smote_augmented(const Matrix& minority, const SmoteResult& result);

}  // namespace smokerisk
