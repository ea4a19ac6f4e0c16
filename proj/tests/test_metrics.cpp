#include <doctest.h>

#include <cmath>

#include "smokerisk/common.hpp"
#include "smokerisk/metrics.hpp"
#include "support/oracles.hpp"

using namespace smokerisk;

namespace {

void random_case(Rng& rng, std::size_t n, std::vector<int>& labels, std::vector<double>& scores,
                 bool tie_heavy) {
  labels.resize(n);
  scores.resize(n);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.next_real01() < 0.4 ? 1 : 0;
    scores[i] = tie_heavy ? std::floor(rng.next_real01() * 5) / 4.0 : rng.next_real01();
    has_pos |= labels[i] == 1;
    has_neg |= labels[i] == 0;
  }
  if (!has_pos) labels[0] = 1;
  if (!has_neg) labels[n - 1] = 0;
}

}  // namespace

TEST_CASE("confusion counts by hand") {
  std::vector<int> labels = {1, 0, 1, 0};
  std::vector<double> scores = {0.9, 0.8, 0.4, 0.1};
  ConfusionMatrix cm = confusion(labels, scores, 0.5);
  CHECK(cm.tp == 1);
  CHECK(cm.fp == 1);
  CHECK(cm.fn == 1);
  CHECK(cm.tn == 1);
  CHECK(cm.total() == 4);
}

TEST_CASE("confusion edge cases") {
  std::vector<int> ones = {1, 1, 1};
  std::vector<double> zeros = {0, 0, 0};
  ConfusionMatrix cm = confusion(ones, zeros, 0.5);
  CHECK(cm.tp == 0);
  CHECK(cm.fn == 3);

  std::vector<int> labels = {1, 0};
  std::vector<double> perfect = {0.9, 0.1};
  ConfusionMatrix p = confusion(labels, perfect, 0.5);
  CHECK(p.fp == 0);
  CHECK(p.fn == 0);

  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<double>{}, 0.5), DataError);
}

TEST_CASE("metric identities reproduce the published RF values") {
  // g_mean from sensitivity .801 and specificity .865 -> 0.833
  CHECK(std::fabs(g_mean_of(0.801, 0.865) - 0.833) < 0.001);
  // f1 from precision .775 and sensitivity .801 -> 0.788
  CHECK(std::fabs(f1_of(0.775, 0.801) - 0.788) < 0.001);
}

TEST_CASE("metric_set recomputed from its own confusion matrix") {
  Rng rng(17);
  std::vector<int> labels;
  std::vector<double> scores;
  random_case(rng, 200, labels, scores, false);

  MetricSet m = metric_set(labels, scores, 0.5);
  ConfusionMatrix cm = confusion(labels, scores, 0.5);
  MetricSet again = metrics_from_confusion(cm);
  CHECK(m.accuracy == again.accuracy);
  CHECK(m.sensitivity == again.sensitivity);
  CHECK(m.specificity == again.specificity);
  CHECK(m.precision == again.precision);
}

TEST_CASE("undefined precision reported as NaN, not zero") {
  std::vector<int> labels = {1, 0, 1};
  std::vector<double> scores = {0.1, 0.2, 0.3};  // nothing above threshold
  MetricSet m = metric_set(labels, scores, 0.9);
  CHECK(std::isnan(m.precision));
  CHECK(std::isnan(m.f1));
  CHECK(m.sensitivity == 0.0);
}

TEST_CASE("auc_roc equals the Mann-Whitney pair statistic (randomized)") {
  Rng rng(99);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<int> labels;
    std::vector<double> scores;
    random_case(rng, 5 + rng.below(60), labels, scores, rep % 2 == 0);
    double fast = auc_roc(labels, scores);
    double brute = testing::mann_whitney_auc(labels, scores);
    CHECK(std::fabs(fast - brute) < 1e-12);
  }
}

TEST_CASE("auc invariant under strictly monotone transforms") {
  Rng rng(123);
  std::vector<int> labels;
  std::vector<double> scores;
  random_case(rng, 120, labels, scores, false);
  double base = auc_roc(labels, scores);

  std::vector<double> logit, cubed;
  for (double s : scores) {
    logit.push_back(1.0 / (1.0 + std::exp(-8 * (s - 0.5))));
    cubed.push_back(s * s * s);
  }
  CHECK(auc_roc(labels, logit) == doctest::Approx(base).epsilon(1e-12));
  CHECK(auc_roc(labels, cubed) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("auc complement under score negation") {
  Rng rng(7);
  std::vector<int> labels;
  std::vector<double> scores;
  random_case(rng, 80, labels, scores, false);
  std::vector<double> neg;
  for (double s : scores) neg.push_back(-s);
  CHECK(auc_roc(labels, scores) == doctest::Approx(1.0 - auc_roc(labels, neg)).epsilon(1e-12));
}

TEST_CASE("random scores give auc near 0.5; single-class input errors") {
  Rng rng(2024);
  std::vector<int> labels(20000);
  std::vector<double> scores(20000);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = i % 3 == 0;
    scores[i] = rng.next_real01();
  }
  CHECK(auc_roc(labels, scores) == doctest::Approx(0.5).epsilon(0.02));

  std::vector<int> ones = {1, 1};
  std::vector<double> s = {0.1, 0.2};
  CHECK_THROWS_AS(auc_roc(ones, s), DataError);
  CHECK_THROWS_AS(metric_set(ones, s, 0.5), DataError);
}

TEST_CASE("perfect and inverted rankings bound the AUCs") {
  std::vector<int> labels = {0, 0, 1, 1};
  std::vector<double> perfect = {0.1, 0.2, 0.8, 0.9};
  std::vector<double> inverted = {0.9, 0.8, 0.2, 0.1};
  CHECK(auc_roc(labels, perfect) == 1.0);
  CHECK(auc_roc(labels, inverted) == 0.0);
  CHECK(auc_pr(labels, perfect) == 1.0);
}

TEST_CASE("roc and pr curves end at their corner points") {
  std::vector<int> labels = {1, 0, 1, 0, 1};
  std::vector<double> scores = {0.9, 0.7, 0.6, 0.4, 0.2};
  auto roc = roc_curve(labels, scores);
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == doctest::Approx(1.0));
  CHECK(roc.back().y == doctest::Approx(1.0));

  auto pr = pr_curve(labels, scores);
  CHECK(pr.back().x == doctest::Approx(1.0));  // recall reaches 1
  // curve csv has a header and one line per point
  auto csv = curve_to_csv(roc, "fpr", "tpr");
  CHECK(csv.find("fpr,tpr,threshold\n") == 0);
}
