#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "smokerisk/boruta.hpp"
#include "support/datagen.hpp"

using namespace smokerisk;

namespace {

BorutaConfig quick_cfg(std::uint64_t seed, int iters = 30) {
  BorutaConfig cfg;
  cfg.max_iterations = iters;
  cfg.alpha = 0.05;
  cfg.seed = seed;
  cfg.forest.n_trees = 15;
  cfg.forest.max_depth = 6;
  cfg.forest.min_samples_leaf = 5;
  return cfg;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("binomial tails: exact values and symmetry") {
  // P(X >= 8 | n=10, p=.5) = (45 + 10 + 1)/1024
  CHECK(binomial_tail_geq(8, 10) == doctest::Approx(56.0 / 1024.0).epsilon(1e-12));
  CHECK(binomial_tail_leq(2, 10) == doctest::Approx(56.0 / 1024.0).epsilon(1e-12));
  CHECK(binomial_tail_geq(0, 10) == 1.0);
  CHECK(binomial_tail_leq(10, 10) == 1.0);
  CHECK(binomial_tail_geq(11, 10) == 0.0);
}

TEST_CASE("a copy of the label is confirmed, pure noise is never confirmed") {
  Rng rng(3);
  const std::size_t n = 250;
  Matrix X(n, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.next_real01() < 0.4;
    X.at(i, 0) = y[i];                      // exact copy of the target
    X.at(i, 1) = rng.next_real01();         // noise
    X.at(i, 2) = rng.next_real01();         // noise
    X.at(i, 3) = y[i] + 0.3 * (rng.next_real01() - 0.5);  // strong signal
  }
  BorutaResult res = boruta(X, y, {"copy", "noise_a", "noise_b", "strong"}, quick_cfg(11), 2);

  CHECK(contains(res.confirmed, "copy"));
  CHECK_FALSE(contains(res.confirmed, "noise_a"));
  CHECK_FALSE(contains(res.confirmed, "noise_b"));
  CHECK(res.iterations_run <= 30);
  CHECK(res.confirmed.size() + res.rejected.size() + res.tentative.size() == 4);
}

TEST_CASE("zero candidate features is an error; bad config rejected") {
  Matrix empty(5, 0);
  std::vector<int> y = {0, 1, 0, 1, 0};
  CHECK_THROWS_AS(boruta(empty, y, {}, quick_cfg(1)), DataError);

  Matrix X(5, 1);
  BorutaConfig bad = quick_cfg(1);
  bad.alpha = 1.5;
  CHECK_THROWS_AS(boruta(X, y, {"x"}, bad), ConfigError);
}

TEST_CASE("determinism per seed; shadows never appear in the result") {
  Rng rng(5);
  Matrix X(120, 3);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < 120; ++i) {
    y[i] = rng.next_real01() < 0.5;
    X.at(i, 0) = y[i] + 0.2 * rng.next_real01();
    X.at(i, 1) = rng.next_real01();
    X.at(i, 2) = rng.next_real01();
  }
  BorutaResult a = boruta(X, y, {"sig", "n1", "n2"}, quick_cfg(42, 15), 1);
  BorutaResult b = boruta(X, y, {"sig", "n1", "n2"}, quick_cfg(42, 15), 3);
  CHECK(a.to_json().dump() == b.to_json().dump());
  for (const auto& name : a.confirmed) CHECK(name.find("shadow") == std::string::npos);
  CHECK(a.candidates.size() == 3);
}

TEST_CASE("monotone evidence: a feature that always hits confirms once reachable") {
  // hits == iterations; the binomial threshold at alpha=.05/(2*2) needs ~7 iterations
  int n = 0;
  while (binomial_tail_geq(n, n) >= 0.05 / 4.0) ++n;
  CHECK(n <= 8);  // sanity: the threshold is reachable quickly

  Rng rng(7);
  Matrix X(200, 2);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = rng.next_real01() < 0.5;
    X.at(i, 0) = y[i];
    X.at(i, 1) = rng.next_real01();
  }
  BorutaResult res = boruta(X, y, {"copy", "noise"}, quick_cfg(9, 40), 2);
  CHECK(contains(res.confirmed, "copy"));
  // the copy feature hit nearly every iteration it was alive
  CHECK(res.hits[0] >= res.iterations_run - 2);
}

TEST_CASE("removing a rejected feature does not change the confirmed set") {
  Rng rng(13);
  Matrix X(220, 3);
  std::vector<int> y(220);
  for (std::size_t i = 0; i < 220; ++i) {
    y[i] = rng.next_real01() < 0.45;
    X.at(i, 0) = y[i] + 0.25 * rng.next_real01();
    X.at(i, 1) = y[i] - 0.25 * rng.next_real01();
    X.at(i, 2) = rng.next_real01();
  }
  BorutaResult full = boruta(X, y, {"a", "b", "noise"}, quick_cfg(21, 25), 2);

  Matrix X2(220, 2);
  for (std::size_t i = 0; i < 220; ++i) {
    X2.at(i, 0) = X.at(i, 0);
    X2.at(i, 1) = X.at(i, 1);
  }
  BorutaResult reduced = boruta(X2, y, {"a", "b"}, quick_cfg(21, 25), 2);
  CHECK(contains(reduced.confirmed, "a") == contains(full.confirmed, "a"));
  CHECK(contains(reduced.confirmed, "b") == contains(full.confirmed, "b"));
}

TEST_CASE("select_apply projects confirmed plus carried columns") {
  Table t = testing::synthetic_screening_table(50, 51);
  BorutaResult res;
  res.confirmed = {"Gtp", "hemoglobin"};
  res.tentative = {"triglyceride"};
  res.rejected = {"age"};

  Table projected = select_apply(t, res, false);
  CHECK(projected.schema.index_of("Gtp") >= 0);
  CHECK(projected.schema.index_of("hemoglobin") >= 0);
  CHECK(projected.schema.index_of("triglyceride") < 0);
  CHECK(projected.schema.index_of("smoking") >= 0);  // label rides along
  CHECK(projected.schema.index_of("ID") >= 0);       // identifier rides along
  CHECK(projected.schema.index_of("age") < 0);

  Table with_tent = select_apply(t, res, true);
  CHECK(with_tent.schema.index_of("triglyceride") >= 0);

  BorutaResult none;
  CHECK_THROWS_AS(select_apply(t, none, false), DataError);
}

TEST_CASE("boruta result json round-trip keeps hit history") {
  BorutaResult res;
  res.candidates = {"a", "b"};
  res.confirmed = {"a"};
  res.rejected = {"b"};
  res.hits = {9, 1};
  res.iterations_run = 10;
  res.history.push_back({0.12, {"a"}});
  BorutaResult back = BorutaResult::from_json(nlohmann::json::parse(res.to_json().dump()));
  CHECK(back.confirmed == res.confirmed);
  CHECK(back.hits == res.hits);
  CHECK(back.iterations_run == 10);
}
