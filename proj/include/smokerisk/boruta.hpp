#pragma once

#include <span>
#include <string>
#include <vector>

#include "smokerisk/ensemble.hpp"
#include "smokerisk/table.hpp"

namespace smokerisk {

struct BorutaConfig {
  int max_iterations = 100;
  double alpha = 0.05;
  FitConfig forest;  // importance forest per iteration
  std::uint64_t seed = 0;
};

struct BorutaResult {
  std::vector<std::string> confirmed;
  std::vector<std::string> rejected;
  std::vector<std::string> tentative;
  std::vector<std::string> candidates;  // original order
  std::vector<int> hits;                // per candidate
  int iterations_run = 0;

  struct IterationRecord {
    double shadow_max = 0.0;
    std::vector<std::string> hit_features;
  };
  std::vector<IterationRecord> history;

  nlohmann::json to_json() const;
  static BorutaResult from_json(const nlohmann::json& j);
};

// All-relevant feature selection: each iteration trains a forest on the
// surviving candidates plus freshly permuted shadow copies, records a hit
// when a feature's mean impurity decrease beats the best shadow, and decides
// features by a two-sided binomial test (p = 0.5) with Bonferroni correction
// across the candidate set. Rejected features leave the pool.
BorutaResult boruta(const Matrix& X, std::span<const int> y,
                    const std::vector<std::string>& feature_names, const BorutaConfig& cfg,
                    int threads = 1);

// Projection onto confirmed (plus tentative when keep_tentative) columns;
// label and identifier columns ride along.
Table select_apply(const Table& t, const BorutaResult& result, bool keep_tentative = false);

// Exact Bin(n, 0.5) tails, exposed for tests.
double binomial_tail_geq(int hits, int n);
double binomial_tail_leq(int hits, int n);

}  // namespace smokerisk
