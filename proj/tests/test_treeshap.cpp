#include <doctest.h>

#include <cmath>
#include <functional>

#include "smokerisk/treeshap.hpp"
#include "support/oracles.hpp"

using namespace smokerisk;
using testing::brute_force_shap;
using testing::random_tree;

namespace {

Tree stump(int feature, double threshold, double left_val, double right_val, double wl, double wr) {
  Tree t;
  t.nodes.resize(3);
  t.nodes[0] = {feature, threshold, 1, 2, 0.0, wl + wr};
  t.nodes[1] = {-1, 0, -1, -1, left_val, wl};
  t.nodes[2] = {-1, 0, -1, -1, right_val, wr};
  return t;
}

}  // namespace

TEST_CASE("single-leaf tree: zero attributions, base equals the leaf") {
  Tree t;
  t.nodes.push_back({-1, 0, -1, -1, 0.37, 12.0});
  double x[2] = {1.0, 2.0};
  ShapVector sv = tree_shap(t, x, 2);
  CHECK(sv.base_value == doctest::Approx(0.37));
  for (double v : sv.values) CHECK(v == 0.0);
}

TEST_CASE("depth-1 stump: phi_j = f(x) - E[f], everything else zero") {
  Tree t = stump(1, 0.5, 0.2, 0.8, 30, 70);
  double expect_base = (30 * 0.2 + 70 * 0.8) / 100.0;
  double x_left[3] = {9, 0.4, 9};
  ShapVector sv = tree_shap(t, x_left, 3);
  CHECK(sv.base_value == doctest::Approx(expect_base).epsilon(1e-12));
  CHECK(sv.values[1] == doctest::Approx(0.2 - expect_base).epsilon(1e-12));
  CHECK(sv.values[0] == 0.0);
  CHECK(sv.values[2] == 0.0);

  double x_right[3] = {9, 0.9, 9};
  ShapVector sv2 = tree_shap(t, x_right, 3);
  CHECK(sv2.values[1] == doctest::Approx(0.8 - expect_base).epsilon(1e-12));
}

TEST_CASE("local accuracy on randomized trees and inputs") {
  Rng rng(2025);
  for (int rep = 0; rep < 400; ++rep) {
    int m = 2 + static_cast<int>(rng.below(6));
    Tree t = random_tree(rng, m, 2 + static_cast<int>(rng.below(5)));
    std::vector<double> x(m);
    for (auto& v : x) v = rng.next_real01() * 2 - 1;

    ShapVector sv = tree_shap(t, x.data(), m);
    double sum = sv.base_value;
    for (double v : sv.values) sum += v;
    CHECK(std::fabs(sum - t.predict_row(x.data())) < 1e-8);
  }
}

TEST_CASE("exact equality with brute-force Shapley for up to 4 features") {
  Rng rng(77);
  for (int rep = 0; rep < 120; ++rep) {
    int m = 1 + static_cast<int>(rng.below(4));
    Tree t = random_tree(rng, m, 1 + static_cast<int>(rng.below(4)));
    std::vector<double> x(m);
    for (auto& v : x) v = rng.next_real01() * 2 - 1;

    ShapVector fast = tree_shap(t, x.data(), m);
    std::vector<double> brute = brute_force_shap(t, x.data(), m);
    for (int f = 0; f < m; ++f) {
      CHECK(std::fabs(fast.values[f] - brute[f]) < 1e-8);
    }
  }
}

TEST_CASE("dummy feature gets exactly zero") {
  Rng rng(5);
  // trees over features {0,1} but evaluated with m=4: features 2,3 never split
  for (int rep = 0; rep < 40; ++rep) {
    Tree t = random_tree(rng, 2, 3);
    double x[4] = {rng.next_real01(), rng.next_real01(), rng.next_real01(), rng.next_real01()};
    ShapVector sv = tree_shap(t, x, 4);
    CHECK(sv.values[2] == 0.0);
    CHECK(sv.values[3] == 0.0);
  }
}

TEST_CASE("symmetric features receive equal attributions on symmetric input") {
  // f(x) = [x0<=.5] XOR-ish symmetric structure with equal covers
  Tree t;
  t.nodes.resize(7);
  t.nodes[0] = {0, 0.5, 1, 2, 0, 100};
  t.nodes[1] = {1, 0.5, 3, 4, 0, 50};
  t.nodes[2] = {1, 0.5, 5, 6, 0, 50};
  t.nodes[3] = {-1, 0, -1, -1, 0.0, 25};
  t.nodes[4] = {-1, 0, -1, -1, 1.0, 25};
  t.nodes[5] = {-1, 0, -1, -1, 1.0, 25};
  t.nodes[6] = {-1, 0, -1, -1, 0.0, 25};
  double x[2] = {0.3, 0.3};
  ShapVector sv = tree_shap(t, x, 2);
  CHECK(sv.values[0] == doctest::Approx(sv.values[1]).epsilon(1e-12));
}

TEST_CASE("forest shap averages trees in probability space with local accuracy") {
  Rng rng(11);
  EnsembleModel forest;
  forest.kind = EnsembleKind::Forest;
  forest.feature_names = {"a", "b", "c"};
  for (int i = 0; i < 5; ++i) forest.trees.push_back(random_tree(rng, 3, 3));

  double x[3] = {0.1, -0.4, 0.7};
  ShapVector sv = tree_shap(forest, x);
  double sum = sv.base_value;
  for (double v : sv.values) sum += v;
  CHECK(std::fabs(sum - forest.proba(x)) < 1e-8);

  // additivity: ensemble shap is the mean of per-tree shap
  std::vector<double> mean(3, 0.0);
  for (const auto& t : forest.trees) {
    ShapVector per = tree_shap(t, x, 3);
    for (int f = 0; f < 3; ++f) mean[f] += per.values[f];
  }
  for (int f = 0; f < 3; ++f) {
    CHECK(sv.values[f] == doctest::Approx(mean[f] / 5.0).epsilon(1e-12));
  }
}

TEST_CASE("boosted shap sums trees on the raw-score scale with local accuracy") {
  Rng rng(13);
  EnsembleModel boosted;
  boosted.kind = EnsembleKind::Boosted;
  boosted.feature_names = {"a", "b"};
  boosted.learning_rate = 0.3;
  boosted.base_score = -0.4;
  for (int i = 0; i < 4; ++i) boosted.trees.push_back(random_tree(rng, 2, 3));

  double x[2] = {0.2, 0.9};
  ShapVector sv = tree_shap(boosted, x);
  double sum = sv.base_value;
  for (double v : sv.values) sum += v;
  CHECK(std::fabs(sum - boosted.raw_score(x)) < 1e-8);
}

TEST_CASE("missing cover metadata raises") {
  Tree t = stump(0, 0.5, 0.1, 0.9, 10, 20);
  t.nodes[0].weighted_count = 0.0;
  double x[1] = {0.2};
  CHECK_THROWS_AS(tree_shap(t, x, 1), ModelError);
}

TEST_CASE("shap_matrix + ranking: ignored feature scores zero, duplicates keep order") {
  Rng rng(21);
  EnsembleModel forest;
  forest.kind = EnsembleKind::Forest;
  forest.feature_names = {"used", "unused"};
  for (int i = 0; i < 3; ++i) forest.trees.push_back(random_tree(rng, 1, 3));  // only feature 0

  Matrix X(8, 2);
  for (auto& v : X.data) v = rng.next_real01();
  ShapSummary summary = shap_summary(forest, X, 2);
  REQUIRE(summary.ranking.items.size() == 2);
  CHECK(summary.ranking.items[0].feature == "used");
  CHECK(summary.ranking.items[1].mean_abs_shap == 0.0);
  CHECK(summary.ranking.items.back().cumulative_share == doctest::Approx(1.0));

  // duplicating rows leaves the ranking unchanged
  Matrix X2(16, 2);
  for (std::size_t r = 0; r < 16; ++r) std::copy_n(X.row(r % 8), 2, X2.row(r));
  ShapSummary dup = shap_summary(forest, X2, 2);
  CHECK(dup.ranking.items[0].mean_abs_shap ==
        doctest::Approx(summary.ranking.items[0].mean_abs_shap).epsilon(1e-12));
}

TEST_CASE("group importance: means per system, errors on unmapped features") {
  ImportanceRanking ranking;
  ranking.items = {{"Gtp", 0.0596, 0.5}, {"ALT", 0.0121, 0.8}, {"AST", 0.0092, 0.9},
                   {"age", 0.02, 1.0}};
  SystemMap map;
  map.systems = {{"hepatic", {"Gtp", "ALT", "AST"}}, {"demographic", {"age"}}};
  auto groups = group_importance(ranking, map);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].first == "hepatic");
  CHECK(groups[0].second == doctest::Approx((0.0596 + 0.0121 + 0.0092) / 3.0));

  ImportanceRanking extra = ranking;
  extra.items.push_back({"mystery", 0.01, 1.0});
  CHECK_THROWS_AS(group_importance(extra, map), ConfigError);

  // one system holding every feature: importance = mean over all
  SystemMap all_in_one;
  all_in_one.systems = {{"everything", {"Gtp", "ALT", "AST", "age"}}};
  auto single = group_importance(ranking, all_in_one);
  CHECK(single[0].second == doctest::Approx((0.0596 + 0.0121 + 0.0092 + 0.02) / 4.0));

  // empty systems are rejected at parse time
  nlohmann::json bad = {{"systems", {{"hepatic", nlohmann::json::array()}}}};
  CHECK_THROWS_AS(SystemMap::from_json(bad), ConfigError);
}

TEST_CASE("dependence grid: constant model is flat, stump shows one step") {
  EnsembleModel constant;
  constant.kind = EnsembleKind::Forest;
  constant.feature_names = {"age", "bmi"};
  Tree leaf;
  leaf.nodes.push_back({-1, 0, -1, -1, 0.42, 10});
  constant.trees.push_back(leaf);

  Rng rng(31);
  Matrix X(20, 2);
  for (auto& v : X.data) v = rng.next_real01() * 100;

  GridSpec grid{0, 100, 5, 0, 100, 4};
  DependenceGrid flat = dependence_grid(constant, X, 0, 1, grid);
  for (double v : flat.mean_prediction.data) CHECK(v == doctest::Approx(0.42));

  EnsembleModel stump_model;
  stump_model.kind = EnsembleKind::Forest;
  stump_model.feature_names = {"age", "bmi"};
  stump_model.trees.push_back(stump(0, 50.0, 0.1, 0.9, 50, 50));
  GridSpec grid2{0, 100, 11, 0, 100, 2};
  DependenceGrid stepped = dependence_grid(stump_model, X, 0, 1, grid2);
  for (int ia = 0; ia < 11; ++ia) {
    double expect = stepped.axis_a[ia] <= 50.0 ? 0.1 : 0.9;
    CHECK(stepped.mean_prediction.at(ia, 0) == doctest::Approx(expect));
    CHECK(stepped.mean_prediction.at(ia, 1) == doctest::Approx(expect));
  }
  CHECK(stepped.to_csv().find("age,bmi,mean_prediction\n") == 0);

  GridSpec empty{0, 1, 0, 0, 1, 5};
  CHECK_THROWS_AS(dependence_grid(constant, X, 0, 1, empty), ConfigError);
}
