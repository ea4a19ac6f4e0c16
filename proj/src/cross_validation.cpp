#include "smokerisk/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace smokerisk {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// =============================================================================
// Fold machinery
// =============================================================================

FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                                bool allow_small_classes) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
  if (labels.size() < static_cast<std::size_t>(k)) {
    throw DataError("stratified_kfold: fewer rows than folds");
  }
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("stratified_kfold: labels must be 0/1");
    by_class[labels[i]].push_back(i);
  }
  if (!allow_small_classes) {
    for (int c = 0; c < 2; ++c) {
      if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k)) {
        throw DataError("stratified_kfold: class " + std::to_string(c) + " has only " +
                        std::to_string(by_class[c].size()) + " members for k=" +
                        std::to_string(k));
      }
    }
  }

  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(labels.size(), -1);
  Rng rng(seed);
  std::size_t counter = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (std::size_t r : members) {
      fa.fold_of[r] = static_cast<int>(counter % static_cast<std::size_t>(k));
      ++counter;
    }
  }
  return fa;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ConfigError("stratified_holdout: test_fraction must be in (0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<std::size_t> train, test;
  Rng rng(seed);
  for (auto& members : by_class) {
    rng.shuffle(members);
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_test ? test : train).push_back(members[i]);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

// =============================================================================
// Model dispatch
// =============================================================================

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Forest: return "forest";
    case ModelKind::GbdtExact: return "gbdt_exact";
    case ModelKind::GbdtHistogram: return "gbdt_histogram";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::LinearSvm: return "linear_svm";
  }
  return "forest";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "forest") return ModelKind::Forest;
  if (s == "gbdt_exact") return ModelKind::GbdtExact;
  if (s == "gbdt_histogram") return ModelKind::GbdtHistogram;
  if (s == "logistic") return ModelKind::Logistic;
  if (s == "linear_svm") return ModelKind::LinearSvm;
  throw ConfigError("unknown model kind: " + s);
}

std::vector<double> FittedModel::predict_proba(const Matrix& X, int threads) const {
  if (ensemble) return ensemble->predict_proba(X, threads);
  if (linear) return linear->predict_proba(X);
  throw ModelError("predict_proba: empty fitted model");
}

nlohmann::json FittedModel::to_json() const {
  if (ensemble) return ensemble->to_json();
  if (linear) return linear->to_json();
  throw ModelError("to_json: empty fitted model");
}

FittedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                      const std::vector<std::string>& feature_names, std::uint64_t seed,
                      int threads) {
  FittedModel out;
  out.kind = spec.kind;

  WeightMap weights;
  if (spec.weighting != WeightMode::None) weights = class_weights(y, spec.weighting);

  switch (spec.kind) {
    case ModelKind::Forest: {
      FitConfig cfg = spec.fit;
      cfg.seed = seed;
      cfg.class_weights = weights;
      out.ensemble = fit_forest(X, y, cfg, feature_names, threads);
      break;
    }
    case ModelKind::GbdtExact:
    case ModelKind::GbdtHistogram: {
      FitConfig cfg = spec.fit;
      cfg.seed = seed;
      cfg.class_weights = weights;
      out.ensemble = fit_gbdt(X, y, cfg,
                              spec.kind == ModelKind::GbdtExact ? SplitSearch::Exact
                                                                : SplitSearch::Histogram,
                              feature_names, threads);
      break;
    }
    case ModelKind::Logistic: {
      LinearFitConfig cfg = spec.linear;
      cfg.class_weights = weights;
      out.linear = fit_logreg(X, y, cfg, feature_names);
      break;
    }
    case ModelKind::LinearSvm: {
      LinearFitConfig cfg = spec.linear;
      cfg.class_weights = weights;
      out.linear = fit_linear_svm(X, y, cfg, feature_names);
      break;
    }
  }
  return out;
}

// =============================================================================
// Cross-validation
// =============================================================================

namespace {

// Training-fold resampling, applied after preprocessing.
void apply_resampling(const ModelSpec& spec, Matrix& X, std::vector<int>& y,
                      std::uint64_t seed) {
  if (spec.resampling == TrainResampling::None) return;

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DataError("resampling: both classes required");
  const auto& minority = pos.size() <= neg.size() ? pos : neg;
  const auto& majority = pos.size() <= neg.size() ? neg : pos;
  const int minority_label = pos.size() <= neg.size() ? 1 : 0;

  Rng rng(seed);
  if (spec.resampling == TrainResampling::Oversample) {
    std::size_t deficit = majority.size() - minority.size();
    Matrix X2(X.rows + deficit, X.cols);
    std::copy(X.data.begin(), X.data.end(), X2.data.begin());
    for (std::size_t i = 0; i < deficit; ++i) {
      std::size_t src = minority[rng.below(minority.size())];
      std::copy_n(X.row(src), X.cols, X2.row(X.rows + i));
      y.push_back(minority_label);
    }
    X = std::move(X2);
  } else if (spec.resampling == TrainResampling::Undersample) {
    std::vector<std::size_t> sampled = majority;
    rng.shuffle(sampled);
    sampled.resize(minority.size());
    std::vector<std::uint8_t> keep(X.rows, 0);
    for (std::size_t r : minority) keep[r] = 1;
    for (std::size_t r : sampled) keep[r] = 1;
    Matrix X2(2 * minority.size(), X.cols);
    std::vector<int> y2;
    std::size_t w = 0;
    for (std::size_t r = 0; r < X.rows; ++r) {
      if (!keep[r]) continue;
      std::copy_n(X.row(r), X.cols, X2.row(w++));
      y2.push_back(y[r]);
    }
    X = std::move(X2);
    y = std::move(y2);
  } else {  // Smote
    Matrix X_min(minority.size(), X.cols), X_maj(majority.size(), X.cols);
    for (std::size_t i = 0; i < minority.size(); ++i) std::copy_n(X.row(minority[i]), X.cols, X_min.row(i));
    for (std::size_t i = 0; i < majority.size(); ++i) std::copy_n(X.row(majority[i]), X.cols, X_maj.row(i));
    SmoteConfig cfg = spec.smote;
    cfg.seed = seed;
    SmoteResult res = nrs_boundary_smote(X_min, X_maj, cfg);
    Matrix X2(X.rows + res.synthetic.rows, X.cols);
    std::copy(X.data.begin(), X.data.end(), X2.data.begin());
    for (std::size_t i = 0; i < res.synthetic.rows; ++i) {
      std::copy_n(res.synthetic.row(i), X.cols, X2.row(X.rows + i));
      y.push_back(minority_label);
    }
    X = std::move(X2);
  }
}

// RNG stream per model spec, derived from the hyperparameters that shape the
// learner itself. Name, weighting and resampling stay out of the hash so that
// treatment arms (weighted vs. unweighted, identical duplicate specs) share
// bootstrap randomness and compare as matched pairs.
std::uint64_t spec_stream_id(const ModelSpec& spec) {
  std::string key = to_string(spec.kind) + '|' + std::to_string(spec.fit.n_trees) + '|' +
                    std::to_string(spec.fit.max_depth) + '|' +
                    std::to_string(spec.fit.min_samples_leaf) + '|' +
                    format_double(spec.fit.feature_subsample) + '|' +
                    format_double(spec.fit.learning_rate) + '|' +
                    format_double(spec.fit.l2_leaf_penalty) + '|' +
                    std::to_string(spec.fit.n_bins) + '|' + (spec.fit.bootstrap ? "b" : "-") + '|' +
                    std::to_string(spec.linear.max_iterations) + '|' +
                    format_double(spec.linear.step_size) + '|' + format_double(spec.linear.l2);
  return fnv1a_hash(key);
}

MetricAggregate aggregate_metric(const std::vector<double>& values) {
  MetricAggregate agg;
  std::vector<double> defined;
  for (double v : values) {
    if (!std::isnan(v)) defined.push_back(v);
  }
  agg.n_defined = defined.size();
  if (defined.empty()) {
    agg.mean = agg.sd = kNaN;
    agg.ci = {kNaN, kNaN, kNaN, kNaN, 0.95};
    return agg;
  }
  double sum = 0;
  for (double v : defined) sum += v;
  agg.mean = sum / defined.size();
  if (defined.size() >= 2) {
    agg.ci = mean_ci(defined, 0.95);
    agg.sd = agg.ci.sd;
  } else {
    agg.sd = 0.0;
    agg.ci = {agg.mean, 0.0, agg.mean, agg.mean, 0.95};
  }
  return agg;
}

}  // namespace

CVReport cross_validate(const Table& t, const std::vector<ModelSpec>& specs, int k,
                        std::uint64_t seed, const CVOptions& opts) {
  if (specs.empty()) throw ConfigError("cross_validate: no model specs");
  int label_col = t.schema.label_index();
  if (label_col < 0) throw DataError("cross_validate: schema designates no label column");

  Table encoded = encode(t);
  std::vector<int> labels(encoded.n_rows);
  for (std::size_t r = 0; r < encoded.n_rows; ++r) {
    if (encoded.miss[label_col][r]) throw DataError("cross_validate: missing label");
    labels[r] = static_cast<int>(encoded.cols[label_col][r]);
  }

  FoldAssignment folds = stratified_kfold(labels, k, derive_seed(seed, 0x0f01d5));

  CVReport report;
  report.k = k;
  report.seed = seed;
  report.threshold = opts.threshold;
  for (const auto& s : specs) report.model_names.push_back(s.name);
  report.per_fold.assign(specs.size(), std::vector<MetricSet>(k));
  if (opts.keep_oof_scores) {
    report.oof_scores.assign(specs.size(), std::vector<double>(encoded.n_rows, kNaN));
    report.oof_labels = labels;
  }

  std::vector<std::exception_ptr> fold_errors(k);
  parallel_for(static_cast<std::size_t>(k), opts.threads, [&](std::size_t f) {
    try {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t r = 0; r < encoded.n_rows; ++r) {
        (folds.fold_of[r] == static_cast<int>(f) ? test_rows : train_rows).push_back(r);
      }
      Table train = encoded.select_rows(train_rows);
      Table test = encoded.select_rows(test_rows);

      // Leakage guard: plans come from the training fold only.
      if (opts.impute) {
        ImputePlan plan = fit_impute(train, default_impute_strategies(train.schema));
        train = apply_impute(train, plan);
        test = apply_impute(test, plan);
      }
      if (opts.standardize) {
        ScalerParams scaler = fit_scaler(train);
        train = apply_scaler(train, scaler);
        test = apply_scaler(test, scaler);
      }

      ModelInput train_mi = make_model_input(train);
      ModelInput test_mi = make_model_input(test);

      for (std::size_t m = 0; m < specs.size(); ++m) {
        std::uint64_t model_seed = derive_seed(derive_seed(seed, spec_stream_id(specs[m])), f);
        Matrix X = train_mi.X;
        std::vector<int> y = train_mi.y;
        apply_resampling(specs[m], X, y, derive_seed(model_seed, 0x5e5a));

        // Folds already run in parallel; keep per-model fitting serial.
        FittedModel model = fit_model(specs[m], X, y, train_mi.feature_names, model_seed, 1);
        std::vector<double> scores = model.predict_proba(test_mi.X, 1);
        report.per_fold[m][f] = metric_set(test_mi.y, scores, opts.threshold);
        if (opts.keep_oof_scores) {
          for (std::size_t i = 0; i < test_rows.size(); ++i) {
            report.oof_scores[m][test_rows[i]] = scores[i];
          }
        }
      }
    } catch (...) {
      fold_errors[f] = std::current_exception();
    }
  });
  for (int f = 0; f < k; ++f) {
    if (fold_errors[f]) {
      try {
        std::rethrow_exception(fold_errors[f]);
      } catch (const std::exception& e) {
        throw ModelError("cross_validate: fold " + std::to_string(f) + ": " + e.what());
      }
    }
  }

  for (std::size_t m = 0; m < specs.size(); ++m) {
    for (const auto& metric : MetricSet::names()) {
      std::vector<double> values;
      for (int f = 0; f < k; ++f) values.push_back(report.per_fold[m][f].get(metric));
      report.aggregates[specs[m].name][metric] = aggregate_metric(values);
    }
  }

  for (std::size_t a = 0; a < specs.size(); ++a) {
    for (std::size_t b = a + 1; b < specs.size(); ++b) {
      std::vector<double> auc_a, auc_b;
      for (int f = 0; f < k; ++f) {
        auc_a.push_back(report.per_fold[a][f].auc_roc);
        auc_b.push_back(report.per_fold[b][f].auc_roc);
      }
      report.pairwise.push_back({specs[a].name, specs[b].name, paired_t_test(auc_a, auc_b)});
    }
  }
  return report;
}

nlohmann::json CVReport::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json jmodels = nlohmann::json::object();
  for (std::size_t m = 0; m < model_names.size(); ++m) {
    nlohmann::json jfolds = nlohmann::json::array();
    for (const auto& ms : per_fold[m]) {
      nlohmann::json jm;
      for (const auto& name : MetricSet::names()) jm[name] = num(ms.get(name));
      jfolds.push_back(jm);
    }
    nlohmann::json jagg = nlohmann::json::object();
    for (const auto& [metric, agg] : aggregates.at(model_names[m])) {
      jagg[metric] = {{"mean", num(agg.mean)},
                      {"sd", num(agg.sd)},
                      {"ci_lower", num(agg.ci.lower)},
                      {"ci_upper", num(agg.ci.upper)},
                      {"n_defined", agg.n_defined}};
    }
    jmodels[model_names[m]] = {{"folds", jfolds}, {"aggregate", jagg}};
  }
  nlohmann::json jpairs = nlohmann::json::array();
  for (const auto& p : pairwise) {
    jpairs.push_back({{"model_a", p.model_a},
                      {"model_b", p.model_b},
                      {"mean_difference", num(p.test.mean_difference)},
                      {"t_statistic", std::isinf(p.test.t_statistic)
                                          ? nlohmann::json(p.test.t_statistic > 0 ? "inf" : "-inf")
                                          : num(p.test.t_statistic)},
                      {"p_value", num(p.test.p_value)},
                      {"df", p.test.df}});
  }
  return nlohmann::json{{"k", k},
                        {"seed", seed},
                        {"threshold", threshold},
                        {"models", jmodels},
                        {"pairwise_auc_roc_t_tests", jpairs}};
}

std::string CVReport::to_flat_csv() const {
  std::ostringstream out;
  out << "model,fold,metric,value\n";
  for (std::size_t m = 0; m < model_names.size(); ++m) {
    for (std::size_t f = 0; f < per_fold[m].size(); ++f) {
      for (const auto& metric : MetricSet::names()) {
        double v = per_fold[m][f].get(metric);
        out << model_names[m] << ',' << f << ',' << metric << ',';
        if (!std::isnan(v)) out << format_double(v);
        out << '\n';
      }
    }
  }
  return out.str();
}

// =============================================================================
// Class-weighting impact study
// =============================================================================

WeightingImpact weighting_impact_study(const Table& t, const FitConfig& forest_cfg, int k,
                                       std::uint64_t seed, const CVOptions& opts) {
  ModelSpec weighted;
  weighted.name = "random_forest_weighted";
  weighted.kind = ModelKind::Forest;
  weighted.fit = forest_cfg;
  weighted.weighting = WeightMode::InverseFrequency;

  ModelSpec unweighted = weighted;
  unweighted.name = "random_forest_unweighted";
  unweighted.weighting = WeightMode::None;

  WeightingImpact impact;
  // Same seed => identical folds for both reports.
  impact.weighted = cross_validate(t, {weighted}, k, seed, opts);
  impact.unweighted = cross_validate(t, {unweighted}, k, seed, opts);
  for (const auto& metric : MetricSet::names()) {
    double a = impact.weighted.aggregates.at(weighted.name).at(metric).mean;
    double b = impact.unweighted.aggregates.at(unweighted.name).at(metric).mean;
    impact.delta[metric] = a - b;
  }
  return impact;
}

nlohmann::json WeightingImpact::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json jd = nlohmann::json::object();
  for (const auto& [metric, d] : delta) jd[metric] = num(d);
  return nlohmann::json{{"weighted", weighted.to_json()},
                        {"unweighted", unweighted.to_json()},
                        {"delta", jd}};
}

}  // namespace smokerisk
