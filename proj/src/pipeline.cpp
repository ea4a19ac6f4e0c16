#include "smokerisk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace smokerisk {

namespace fs = std::filesystem;

// =============================================================================
// Config parsing
// =============================================================================

namespace {

PlausibilityMode plausibility_from_string(const std::string& s) {
  if (s == "flag") return PlausibilityMode::Flag;
  if (s == "drop_cell") return PlausibilityMode::DropCell;
  if (s == "reject") return PlausibilityMode::Reject;
  throw ConfigError("unknown plausibility mode: " + s);
}

std::string to_string(PlausibilityMode m) {
  switch (m) {
    case PlausibilityMode::Flag: return "flag";
    case PlausibilityMode::DropCell: return "drop_cell";
    case PlausibilityMode::Reject: return "reject";
  }
  return "flag";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "none") return WeightMode::None;
  if (s == "inverse_frequency") return WeightMode::InverseFrequency;
  if (s == "ratio") return WeightMode::Ratio;
  throw ConfigError("unknown weighting mode: " + s);
}

std::string to_string(WeightMode m) {
  switch (m) {
    case WeightMode::None: return "none";
    case WeightMode::InverseFrequency: return "inverse_frequency";
    case WeightMode::Ratio: return "ratio";
  }
  return "none";
}

TrainResampling resampling_from_string(const std::string& s) {
  if (s == "none") return TrainResampling::None;
  if (s == "oversample") return TrainResampling::Oversample;
  if (s == "undersample") return TrainResampling::Undersample;
  if (s == "smote") return TrainResampling::Smote;
  throw ConfigError("unknown resampling mode: " + s);
}

std::string to_string(TrainResampling r) {
  switch (r) {
    case TrainResampling::None: return "none";
    case TrainResampling::Oversample: return "oversample";
    case TrainResampling::Undersample: return "undersample";
    case TrainResampling::Smote: return "smote";
  }
  return "none";
}

FitConfig fit_from_json(const nlohmann::json& j) {
  FitConfig cfg;
  cfg.n_trees = j.value("n_trees", cfg.n_trees);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.min_samples_leaf = j.value("min_samples_leaf", cfg.min_samples_leaf);
  cfg.feature_subsample = j.value("feature_subsample", cfg.feature_subsample);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.l2_leaf_penalty = j.value("l2_leaf_penalty", cfg.l2_leaf_penalty);
  cfg.n_bins = j.value("n_bins", cfg.n_bins);
  cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
  return cfg;
}

nlohmann::json fit_to_json(const FitConfig& cfg) {
  return nlohmann::json{{"n_trees", cfg.n_trees},
                        {"max_depth", cfg.max_depth},
                        {"min_samples_leaf", cfg.min_samples_leaf},
                        {"feature_subsample", cfg.feature_subsample},
                        {"learning_rate", cfg.learning_rate},
                        {"l2_leaf_penalty", cfg.l2_leaf_penalty},
                        {"n_bins", cfg.n_bins},
                        {"bootstrap", cfg.bootstrap}};
}

ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
  spec.fit = fit_from_json(j);
  spec.linear.max_iterations = j.value("max_iterations", spec.linear.max_iterations);
  spec.linear.step_size = j.value("step_size", spec.linear.step_size);
  spec.linear.l2 = j.value("l2", spec.linear.l2);
  spec.weighting = weight_mode_from_string(j.value("weighting", std::string("none")));
  spec.resampling = resampling_from_string(j.value("resampling", std::string("none")));
  if (j.contains("smote")) {
    spec.smote.k = j["smote"].value("k", spec.smote.k);
    spec.smote.rate = j["smote"].value("rate", spec.smote.rate);
    spec.smote.nrs_boundary = j["smote"].value("nrs_boundary", spec.smote.nrs_boundary);
  }
  return spec;
}

nlohmann::json model_to_json(const ModelSpec& spec) {
  nlohmann::json j = fit_to_json(spec.fit);
  j["name"] = spec.name;
  j["kind"] = to_string(spec.kind);
  j["weighting"] = to_string(spec.weighting);
  j["resampling"] = to_string(spec.resampling);
  j["max_iterations"] = spec.linear.max_iterations;
  j["step_size"] = spec.linear.step_size;
  j["l2"] = spec.linear.l2;
  j["smote"] = {{"k", spec.smote.k},
                {"rate", spec.smote.rate},
                {"nrs_boundary", spec.smote.nrs_boundary}};
  return j;
}

}  // namespace

std::string PipelineConfig::resolve(const std::string& path) const {
  if (path.empty() || fs::path(path).is_absolute() || config_dir.empty()) return path;
  return (fs::path(config_dir) / path).string();
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::string& config_dir) {
  PipelineConfig cfg;
  cfg.config_dir = config_dir;
  cfg.dataset = j.at("dataset").get<std::string>();
  cfg.schema_path = j.at("schema").get<std::string>();
  cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("seed")) {
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.seed_set = true;
  }
  cfg.threads = j.value("threads", 0);
  cfg.plausibility = plausibility_from_string(j.value("plausibility", std::string("flag")));
  if (j.contains("preprocess")) {
    cfg.impute = j["preprocess"].value("impute", true);
    cfg.standardize = j["preprocess"].value("standardize", true);
  }
  if (j.contains("select")) {
    const auto& js = j["select"];
    cfg.select.enabled = js.value("enabled", false);
    cfg.select.alpha = js.value("alpha", 0.05);
    cfg.select.max_iterations = js.value("max_iterations", 100);
    cfg.select.forest = fit_from_json(js);
    if (!js.contains("n_trees")) cfg.select.forest.n_trees = 50;
    if (!js.contains("max_depth")) cfg.select.forest.max_depth = 12;
    if (!js.contains("min_samples_leaf")) cfg.select.forest.min_samples_leaf = 5;
    cfg.select.apply = js.value("apply", false);
    cfg.select.keep_tentative = js.value("keep_tentative", false);
  }
  if (j.contains("models")) {
    for (const auto& jm : j["models"]) cfg.models.push_back(model_from_json(jm));
  }
  if (j.contains("cv")) {
    cfg.cv.enabled = j["cv"].value("enabled", true);
    cfg.cv.k = j["cv"].value("k", 10);
    cfg.cv.threshold = j["cv"].value("threshold", 0.5);
    cfg.cv.holdout = j["cv"].value("holdout", false);
    cfg.cv.holdout_fraction = j["cv"].value("holdout_fraction", 0.2);
  }
  cfg.weighting_study = j.value("weighting_study", false);
  if (j.contains("explain")) {
    const auto& je = j["explain"];
    cfg.explain.enabled = je.value("enabled", false);
    cfg.explain.model = je.value("model", std::string());
    cfg.explain.rows = je.value("rows", 1000u);
    cfg.explain.system_map_path = je.value("system_map", std::string());
    if (je.contains("dependence")) {
      const auto& jd = je["dependence"];
      cfg.explain.dependence = jd.value("enabled", true);
      cfg.explain.dependence_a = jd.value("feature_a", std::string("age"));
      cfg.explain.dependence_b = jd.value("feature_b", std::string("bmi"));
      cfg.explain.dependence_steps = jd.value("steps", 20);
      cfg.explain.dependence_rows = jd.value("rows", 500u);
    }
  }
  if (j.contains("clinical")) {
    const auto& jc = j["clinical"];
    cfg.clinical.enabled = jc.value("enabled", false);
    cfg.clinical.points_table_path = jc.value("points_table", std::string());
    cfg.clinical.rules_path = jc.value("disease_rules", std::string());
    if (jc.contains("diseases")) cfg.clinical.diseases = jc["diseases"].get<std::vector<std::string>>();
    if (jc.contains("models")) cfg.clinical.model_kinds = jc["models"].get<std::vector<std::string>>();
    cfg.clinical.cv_k = jc.value("cv_k", 10);
  }
  if (j.contains("profile")) {
    const auto& jp = j["profile"];
    cfg.profile.enabled = jp.value("enabled", false);
    cfg.profile.components = jp.value("components", 2);
    cfg.profile.clusters = jp.value("clusters", 4);
    cfg.profile.restarts = jp.value("restarts", 8);
    cfg.profile.rows = jp.value("rows", 0u);
    cfg.profile.full_space = jp.value("full_space", false);
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json jmodels = nlohmann::json::array();
  for (const auto& m : models) jmodels.push_back(model_to_json(m));
  nlohmann::json jselect = fit_to_json(select.forest);
  jselect["enabled"] = select.enabled;
  jselect["alpha"] = select.alpha;
  jselect["max_iterations"] = select.max_iterations;
  jselect["apply"] = select.apply;
  jselect["keep_tentative"] = select.keep_tentative;
  return nlohmann::json{
      {"dataset", dataset},
      {"schema", schema_path},
      {"output_dir", output_dir},
      {"seed", seed},
      {"threads", threads},
      {"plausibility", to_string(plausibility)},
      {"preprocess", {{"impute", impute}, {"standardize", standardize}}},
      {"select", jselect},
      {"models", jmodels},
      {"cv",
       {{"enabled", cv.enabled},
        {"k", cv.k},
        {"threshold", cv.threshold},
        {"holdout", cv.holdout},
        {"holdout_fraction", cv.holdout_fraction}}},
      {"weighting_study", weighting_study},
      {"explain",
       {{"enabled", explain.enabled},
        {"model", explain.model},
        {"rows", explain.rows},
        {"system_map", explain.system_map_path},
        {"dependence",
         {{"enabled", explain.dependence},
          {"feature_a", explain.dependence_a},
          {"feature_b", explain.dependence_b},
          {"steps", explain.dependence_steps},
          {"rows", explain.dependence_rows}}}}},
      {"clinical",
       {{"enabled", clinical.enabled},
        {"points_table", clinical.points_table_path},
        {"disease_rules", clinical.rules_path},
        {"diseases", clinical.diseases},
        {"models", clinical.model_kinds},
        {"cv_k", clinical.cv_k}}},
      {"profile",
       {{"enabled", profile.enabled},
        {"components", profile.components},
        {"clusters", profile.clusters},
        {"restarts", profile.restarts},
        {"rows", profile.rows},
        {"full_space", profile.full_space}}}};
}

std::uint64_t PipelineConfig::effective_seed() const {
  if (const char* env = std::getenv("RISK_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw ConfigError("RISK_SEED must be an unsigned integer, got '" + std::string(env) + "'");
    }
  }
  return seed;
}

// =============================================================================
// Validation
// =============================================================================

ValidationReport validate_config(const std::string& path) {
  ValidationReport report;
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) {
      report.errors.push_back("cannot open config: " + path);
      return report;
    }
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      report.errors.push_back(std::string("config parse error: ") + e.what());
      return report;
    }
  }

  PipelineConfig cfg;
  try {
    cfg = PipelineConfig::from_json(j, fs::path(path).parent_path().string());
  } catch (const std::exception& e) {
    report.errors.push_back(e.what());
    return report;
  }

  if (!cfg.seed_set) report.errors.push_back("seed: required for reproducible runs");
  if (!fs::exists(cfg.resolve(cfg.dataset))) {
    report.errors.push_back("dataset: file not found: " + cfg.resolve(cfg.dataset));
  }
  if (!fs::exists(cfg.resolve(cfg.schema_path))) {
    report.errors.push_back("schema: file not found: " + cfg.resolve(cfg.schema_path));
  }
  if (cfg.output_dir.empty()) report.errors.push_back("output_dir: required");
  if (cfg.models.empty()) report.errors.push_back("models: at least one model required");
  if (cfg.cv.k < 2) report.errors.push_back("cv.k: must be >= 2");

  for (const auto& m : cfg.models) {
    try {
      m.fit.validate();
    } catch (const std::exception& e) {
      report.errors.push_back("model '" + m.name + "': " + e.what());
    }
    if (m.resampling == TrainResampling::Smote) {
      if (m.smote.k < 1) report.errors.push_back("model '" + m.name + "': smote.k must be >= 1");
      if (m.smote.rate <= 0) report.errors.push_back("model '" + m.name + "': smote.rate must be > 0");
    }
  }
  if (cfg.explain.enabled) {
    bool found = false;
    for (const auto& m : cfg.models) {
      if (m.name == cfg.explain.model) {
        found = true;
        if (m.kind == ModelKind::Logistic || m.kind == ModelKind::LinearSvm) {
          report.errors.push_back("explain.model: '" + m.name + "' is not a tree ensemble");
        }
      }
    }
    if (!found) report.errors.push_back("explain.model: no model named '" + cfg.explain.model + "'");
    if (!cfg.explain.system_map_path.empty() &&
        !fs::exists(cfg.resolve(cfg.explain.system_map_path))) {
      report.errors.push_back("explain.system_map: file not found: " +
                              cfg.resolve(cfg.explain.system_map_path));
    }
  }
  if (cfg.clinical.enabled) {
    for (const auto& p : {cfg.clinical.points_table_path, cfg.clinical.rules_path}) {
      if (p.empty()) {
        report.errors.push_back("clinical: points_table and disease_rules are required");
      } else if (!fs::exists(cfg.resolve(p))) {
        report.errors.push_back("clinical: file not found: " + cfg.resolve(p));
      }
    }
  }
  if (cfg.profile.enabled) {
    if (cfg.profile.components < 1) report.errors.push_back("profile.components: must be >= 1");
    if (cfg.profile.clusters < 1) report.errors.push_back("profile.clusters: must be >= 1");
  }

  // Data-dependent checks, best effort.
  if (fs::exists(cfg.resolve(cfg.dataset)) && fs::exists(cfg.resolve(cfg.schema_path))) {
    try {
      Schema schema = Schema::load(cfg.resolve(cfg.schema_path));
      Table t = load_csv(cfg.resolve(cfg.dataset), schema, PlausibilityMode::Flag);
      int label = schema.label_index();
      if (label < 0) {
        report.errors.push_back("schema: no label column designated");
      } else {
        std::size_t pos = 0, neg = 0, missing = 0;
        for (std::size_t r = 0; r < t.n_rows; ++r) {
          if (t.miss[label][r]) {
            ++missing;
          } else if (t.cols[label][r] == 1.0) {
            ++pos;
          } else {
            ++neg;
          }
        }
        std::size_t minority = std::min(pos, neg);
        if (missing > 0) {
          report.errors.push_back("label column has " + std::to_string(missing) + " missing values");
        }
        if (minority < static_cast<std::size_t>(cfg.cv.k)) {
          report.errors.push_back("cv.k: " + std::to_string(cfg.cv.k) +
                                  " exceeds the minority class size (" + std::to_string(minority) +
                                  " of " + std::to_string(t.n_rows) + " rows)");
        }
      }
    } catch (const std::exception& e) {
      report.errors.push_back(std::string("dataset check: ") + e.what());
    }
  }
  return report;
}

// =============================================================================
// Pipeline run
// =============================================================================

namespace {

struct BundleWriter {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << content;
    files.push_back(name);
  }
  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }
};

std::vector<std::string> correlation_columns(const Table& t) {
  std::vector<std::string> cols;
  for (const auto& c : t.schema.columns) {
    if (c.kind == ColumnKind::Identifier) continue;
    cols.push_back(c.name);
  }
  return cols;
}

// weight/(height_m)^2 from the screening columns; used only when a dependence
// pair asks for "bmi".
void append_bmi_column(Table& t) {
  int wi = t.schema.index_of("weight(kg)");
  int hi = t.schema.index_of("height(cm)");
  if (wi < 0 || hi < 0) throw DataError("bmi derivation needs 'weight(kg)' and 'height(cm)'");
  ColumnSpec spec;
  spec.name = "bmi";
  spec.kind = ColumnKind::Continuous;
  spec.unit = "kg/m2";
  std::vector<double> vals(t.n_rows);
  std::vector<std::uint8_t> miss(t.n_rows, 0);
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    if (t.is_missing(r, wi) || t.is_missing(r, hi)) {
      vals[r] = std::numeric_limits<double>::quiet_NaN();
      miss[r] = 1;
      continue;
    }
    double h_m = t.value(r, hi) / 100.0;
    vals[r] = t.value(r, wi) / (h_m * h_m);
  }
  t.schema.columns.push_back(spec);
  t.cols.push_back(std::move(vals));
  t.miss.push_back(std::move(miss));
}

std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t want, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (want == 0 || want >= n) return rows;
  Rng rng(seed);
  rng.shuffle(rows);
  rows.resize(want);
  std::sort(rows.begin(), rows.end());
  return rows;
}

double column_percentile(const Matrix& X, std::size_t col, double p) {
  std::vector<double> vals(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) vals[r] = X.at(r, col);
  std::sort(vals.begin(), vals.end());
  return percentile(vals, p);
}

}  // namespace

ReportBundle run_pipeline(const PipelineConfig& cfg) {
  const std::uint64_t seed = cfg.effective_seed();
  if (!cfg.seed_set && std::getenv("RISK_SEED") == nullptr) {
    throw ConfigError("run_pipeline: seed is required (config 'seed' or RISK_SEED)");
  }
  const int threads = resolve_threads(cfg.threads);

  fs::path final_dir = cfg.resolve(cfg.output_dir);
  fs::path tmp_dir = final_dir;
  tmp_dir += ".tmp";
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  fs::create_directories(tmp_dir);

  BundleWriter out{tmp_dir, {}};
  std::string stage = "ingest";
  try {
    // ---- ingest -------------------------------------------------------
    Schema schema = Schema::load(cfg.resolve(cfg.schema_path));
    LoadReport load_report;
    Table raw = load_csv(cfg.resolve(cfg.dataset), schema, cfg.plausibility, &load_report);
    out.write_json("ingest.load_report.json", load_report.to_json());
    out.write("ingest.summary.csv", summarize(raw).to_csv());

    // ---- preprocess -----------------------------------------------------
    stage = "preprocess";
    Table encoded = encode(raw);
    Table imputed = encoded;
    if (cfg.impute) {
      ImputePlan plan = fit_impute(encoded, default_impute_strategies(encoded.schema));
      imputed = apply_impute(encoded, plan);
      out.write_json("preprocess.impute_plan.json", plan.to_json());
    }
    Table scaled = imputed;
    ScalerParams scaler;
    if (cfg.standardize) {
      scaler = fit_scaler(imputed);
      scaled = apply_scaler(imputed, scaler);
      out.write_json("preprocess.scaler.json", scaler.to_json());
    }

    // ---- stats ----------------------------------------------------------
    stage = "stats";
    CorrMatrix corr = pearson_matrix(imputed, correlation_columns(imputed));
    out.write("stats.correlation.csv", corr.to_csv());
    out.write_json("stats.correlation_heatmap.json", corr.to_heatmap_json());

    // ---- select ---------------------------------------------------------
    Table model_table = raw;  // cross_validate re-fits preprocessing per fold
    Table model_scaled = scaled;
    Table model_imputed = imputed;
    if (cfg.select.enabled) {
      stage = "select";
      ModelInput mi = make_model_input(scaled);
      BorutaConfig bcfg;
      bcfg.alpha = cfg.select.alpha;
      bcfg.max_iterations = cfg.select.max_iterations;
      bcfg.forest = cfg.select.forest;
      bcfg.seed = derive_seed(seed, 0x5e1ec7);
      BorutaResult boruta_result = boruta(mi.X, mi.y, mi.feature_names, bcfg, threads);
      out.write_json("select.boruta.json", boruta_result.to_json());
      if (cfg.select.apply) {
        model_table = select_apply(raw, boruta_result, cfg.select.keep_tentative);
        model_scaled = select_apply(scaled, boruta_result, cfg.select.keep_tentative);
        model_imputed = select_apply(imputed, boruta_result, cfg.select.keep_tentative);
      }
    }

    // ---- evaluate -------------------------------------------------------
    stage = "evaluate";
    CVOptions cv_opts;
    cv_opts.threads = threads;
    cv_opts.threshold = cfg.cv.threshold;
    cv_opts.impute = cfg.impute;
    cv_opts.standardize = cfg.standardize;
    if (cfg.cv.enabled && !cfg.models.empty()) {
      CVReport cv = cross_validate(model_table, cfg.models, cfg.cv.k, seed, cv_opts);
      out.write_json("evaluate.cv_report.json", cv.to_json());
      out.write("evaluate.cv_metrics.csv", cv.to_flat_csv());
      for (std::size_t m = 0; m < cv.model_names.size(); ++m) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (std::size_t r = 0; r < cv.oof_labels.size(); ++r) {
          if (!std::isnan(cv.oof_scores[m][r])) {
            labels.push_back(cv.oof_labels[r]);
            scores.push_back(cv.oof_scores[m][r]);
          }
        }
        out.write("evaluate.roc." + cv.model_names[m] + ".csv",
                  curve_to_csv(roc_curve(labels, scores), "fpr", "tpr"));
        out.write("evaluate.pr." + cv.model_names[m] + ".csv",
                  curve_to_csv(pr_curve(labels, scores), "recall", "precision"));
      }
      if (cfg.weighting_study) {
        FitConfig forest_cfg;
        for (const auto& m : cfg.models) {
          if (m.kind == ModelKind::Forest) {
            forest_cfg = m.fit;
            break;
          }
        }
        WeightingImpact impact =
            weighting_impact_study(model_table, forest_cfg, cfg.cv.k, derive_seed(seed, 0x317), cv_opts);
        out.write_json("evaluate.weighting_impact.json", impact.to_json());
      }
      if (cfg.cv.holdout) {
        Table enc = encode(model_table);
        int label_col = enc.schema.label_index();
        std::vector<int> labels(enc.n_rows);
        for (std::size_t r = 0; r < enc.n_rows; ++r) labels[r] = static_cast<int>(enc.cols[label_col][r]);
        auto [train_rows, test_rows] =
            stratified_holdout(labels, cfg.cv.holdout_fraction, derive_seed(seed, 0x801d));
        Table train = enc.select_rows(train_rows);
        Table test = enc.select_rows(test_rows);
        if (cfg.impute) {
          ImputePlan plan = fit_impute(train, default_impute_strategies(train.schema));
          train = apply_impute(train, plan);
          test = apply_impute(test, plan);
        }
        if (cfg.standardize) {
          ScalerParams sp = fit_scaler(train);
          train = apply_scaler(train, sp);
          test = apply_scaler(test, sp);
        }
        ModelInput tr = make_model_input(train);
        ModelInput te = make_model_input(test);
        nlohmann::json jh = nlohmann::json::object();
        for (std::size_t m = 0; m < cfg.models.size(); ++m) {
          FittedModel fitted = fit_model(cfg.models[m], tr.X, tr.y, tr.feature_names,
                                         derive_seed(seed, 0x9000 + m), threads);
          MetricSet ms = metric_set(te.y, fitted.predict_proba(te.X, threads), cfg.cv.threshold);
          nlohmann::json jm;
          for (const auto& name : MetricSet::names()) {
            double v = ms.get(name);
            jm[name] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
          }
          jh[cfg.models[m].name] = jm;
        }
        out.write_json("evaluate.holdout.json",
                       {{"test_fraction", cfg.cv.holdout_fraction}, {"models", jh}});
      }
    }

    // ---- explain ----------------------------------------------------------
    if (cfg.explain.enabled) {
      stage = "explain";
      const ModelSpec* spec = nullptr;
      for (const auto& m : cfg.models) {
        if (m.name == cfg.explain.model) spec = &m;
      }
      if (!spec) throw ConfigError("explain: no model named '" + cfg.explain.model + "'");

      ModelInput mi = make_model_input(model_scaled);
      FittedModel fitted =
          fit_model(*spec, mi.X, mi.y, mi.feature_names, derive_seed(seed, 0xe8), threads);
      if (!fitted.ensemble) throw ConfigError("explain: model '" + spec->name + "' is not a tree ensemble");
      out.write_json("explain.model." + spec->name + ".json", fitted.to_json());

      auto rows = subsample_rows(mi.X.rows, cfg.explain.rows, derive_seed(seed, 0x54a9));
      Matrix Xs(rows.size(), mi.X.cols);
      for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(mi.X.row(rows[i]), mi.X.cols, Xs.row(i));

      ShapSummary summary = shap_summary(*fitted.ensemble, Xs, threads);

      std::ostringstream imp;
      imp << "rank,feature,mean_abs_shap,cumulative_share\n";
      for (std::size_t i = 0; i < summary.ranking.items.size(); ++i) {
        const auto& item = summary.ranking.items[i];
        imp << i + 1 << ',' << item.feature << ',' << format_double(item.mean_abs_shap) << ','
            << format_double(item.cumulative_share) << '\n';
      }
      out.write("explain.importance.csv", imp.str());

      std::ostringstream wide;
      wide << "row,base_value";
      for (const auto& f : summary.shap.feature_names) wide << ',' << f;
      wide << '\n';
      for (std::size_t i = 0; i < rows.size(); ++i) {
        wide << rows[i] << ',' << format_double(summary.shap.base_value);
        for (std::size_t f = 0; f < summary.shap.feature_names.size(); ++f) {
          wide << ',' << format_double(summary.shap.values.at(i, f));
        }
        wide << '\n';
      }
      out.write("explain.shap_values.csv", wide.str());

      // beeswarm long format with raw (pre-scaling) feature values
      ModelInput raw_mi = make_model_input(model_imputed);
      std::ostringstream pts;
      pts << "feature,shap_value,feature_value,row\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t f = 0; f < summary.shap.feature_names.size(); ++f) {
          pts << summary.shap.feature_names[f] << ',' << format_double(summary.shap.values.at(i, f))
              << ',' << format_double(raw_mi.X.at(rows[i], f)) << ',' << rows[i] << '\n';
        }
      }
      out.write("explain.summary_points.csv", pts.str());

      if (!cfg.explain.system_map_path.empty()) {
        SystemMap map = SystemMap::load(cfg.resolve(cfg.explain.system_map_path));
        auto groups = group_importance(summary.ranking, map);
        std::ostringstream sys;
        sys << "system,importance\n";
        for (const auto& [name, value] : groups) sys << name << ',' << format_double(value) << '\n';
        out.write("explain.system_importance.csv", sys.str());
      }

      if (cfg.explain.dependence) {
        // Trees are scale-invariant, so the dependence model trains on raw
        // feature units and the grid axes stay interpretable.
        Table dep_table = model_imputed;
        if ((cfg.explain.dependence_a == "bmi" || cfg.explain.dependence_b == "bmi") &&
            dep_table.schema.index_of("bmi") < 0) {
          append_bmi_column(dep_table);
        }
        ModelInput dep_mi = make_model_input(dep_table);
        auto find_feature = [&](const std::string& name) {
          for (std::size_t f = 0; f < dep_mi.feature_names.size(); ++f) {
            if (dep_mi.feature_names[f] == name) return static_cast<int>(f);
          }
          throw ConfigError("explain.dependence: unknown feature '" + name + "'");
        };
        int fa = find_feature(cfg.explain.dependence_a);
        int fb = find_feature(cfg.explain.dependence_b);
        FittedModel dep_model = fit_model(*spec, dep_mi.X, dep_mi.y, dep_mi.feature_names,
                                          derive_seed(seed, 0xdeb), threads);
        auto dep_rows = subsample_rows(dep_mi.X.rows, cfg.explain.dependence_rows,
                                       derive_seed(seed, 0xdeb2));
        Matrix Xd(dep_rows.size(), dep_mi.X.cols);
        for (std::size_t i = 0; i < dep_rows.size(); ++i) {
          std::copy_n(dep_mi.X.row(dep_rows[i]), dep_mi.X.cols, Xd.row(i));
        }
        GridSpec grid;
        grid.min_a = column_percentile(Xd, fa, 0.02);
        grid.max_a = column_percentile(Xd, fa, 0.98);
        grid.steps_a = cfg.explain.dependence_steps;
        grid.min_b = column_percentile(Xd, fb, 0.02);
        grid.max_b = column_percentile(Xd, fb, 0.98);
        grid.steps_b = cfg.explain.dependence_steps;
        DependenceGrid dg = dependence_grid(*dep_model.ensemble, Xd, fa, fb, grid, threads);
        out.write("explain.dependence.csv", dg.to_csv());
      }
    }

    // ---- clinical ---------------------------------------------------------
    if (cfg.clinical.enabled) {
      stage = "clinical";
      FraminghamTable table = FraminghamTable::load(cfg.resolve(cfg.clinical.points_table_path));
      FraminghamDistribution dist = framingham_distribution(model_imputed, table);
      out.write("clinical.framingham_distribution.csv", dist.to_csv());
      out.write("clinical.framingham_rows.csv", framingham_rows_csv(model_imputed, table));

      auto rules = load_disease_rules(cfg.resolve(cfg.clinical.rules_path));
      std::ostringstream dm;
      dm << "disease,model,auc_mean,auc_sd,prevalence,n_features\n";
      for (const auto& rule : rules) {
        if (!cfg.clinical.diseases.empty() &&
            std::find(cfg.clinical.diseases.begin(), cfg.clinical.diseases.end(), rule.name) ==
                cfg.clinical.diseases.end()) {
          continue;
        }
        Table sub = disease_model_table(imputed, rule);
        auto labels = derive_disease_labels(imputed, rule);
        std::size_t n_pos = std::accumulate(labels.begin(), labels.end(), std::size_t{0});
        std::size_t minority = std::min(n_pos, labels.size() - n_pos);
        double prevalence = static_cast<double>(n_pos) / static_cast<double>(labels.size());
        if (minority < static_cast<std::size_t>(cfg.clinical.cv_k)) {
          // not enough cases to stratify; report the prevalence and move on
          for (const auto& kind : cfg.clinical.model_kinds) {
            dm << rule.name << ',' << kind << ",,," << format_double(prevalence) << ','
               << rule.predictor_features.size() << '\n';
          }
          continue;
        }
        std::vector<ModelSpec> specs;
        for (const auto& kind : cfg.clinical.model_kinds) {
          ModelSpec spec;
          spec.name = kind;
          spec.kind = model_kind_from_string(kind);
          spec.weighting = WeightMode::InverseFrequency;
          // modest forest: these sub-models are diagnostic, not the headline
          spec.fit.n_trees = 60;
          spec.fit.max_depth = 12;
          spec.fit.min_samples_leaf = 10;
          specs.push_back(spec);
        }
        CVReport cv = cross_validate(sub, specs, cfg.clinical.cv_k, derive_seed(seed, 0xd15e),
                                     cv_opts);
        for (const auto& spec : specs) {
          const auto& agg = cv.aggregates.at(spec.name).at("auc_roc");
          dm << rule.name << ',' << spec.name << ',' << format_double(agg.mean) << ','
             << format_double(agg.sd) << ',' << format_double(prevalence) << ','
             << rule.predictor_features.size() << '\n';
        }
      }
      out.write("clinical.disease_models.csv", dm.str());
    }

    // ---- profile ------------------------------------------------------------
    if (cfg.profile.enabled) {
      stage = "profile";
      ModelInput mi = make_model_input(model_scaled);
      auto rows = subsample_rows(mi.X.rows, cfg.profile.rows, derive_seed(seed, 0x9ca));
      Matrix Xp(rows.size(), mi.X.cols);
      for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(mi.X.row(rows[i]), mi.X.cols, Xp.row(i));

      PCAModel pca = pca_fit(Xp, cfg.profile.components);
      Matrix scores = pca_transform(pca, Xp);
      const Matrix& cluster_space = cfg.profile.full_space ? Xp : scores;
      ClusterResult clusters = kmeans(cluster_space, cfg.profile.clusters,
                                      derive_seed(seed, 0xc1u), cfg.profile.restarts, threads);

      std::ostringstream var;
      var << "component,explained_variance,explained_ratio\n";
      for (std::size_t c = 0; c < pca.explained_ratio.size(); ++c) {
        var << c + 1 << ',' << format_double(pca.explained_variance[c]) << ','
            << format_double(pca.explained_ratio[c]) << '\n';
      }
      out.write("profile.pca_variance.csv", var.str());

      std::ostringstream sc;
      sc << "row";
      for (int c = 0; c < cfg.profile.components; ++c) sc << ",pc" << c + 1;
      sc << ",cluster\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        sc << rows[i];
        for (int c = 0; c < cfg.profile.components; ++c) sc << ',' << format_double(scores.at(i, c));
        sc << ',' << clusters.assignment[i] << '\n';
      }
      out.write("profile.pca_scores.csv", sc.str());

      std::ostringstream cc;
      cc << "cluster";
      for (std::size_t f = 0; f < cluster_space.cols; ++f) cc << ",dim" << f + 1;
      cc << ",size\n";
      std::vector<std::size_t> sizes(cfg.profile.clusters, 0);
      for (int a : clusters.assignment) ++sizes[a];
      for (int c = 0; c < cfg.profile.clusters; ++c) {
        cc << c;
        for (std::size_t f = 0; f < cluster_space.cols; ++f) {
          cc << ',' << format_double(clusters.centroids.at(c, f));
        }
        cc << ',' << sizes[c] << '\n';
      }
      out.write("profile.cluster_centers.csv", cc.str());

      // per-cluster means in raw units, for analyst-side naming
      ModelInput raw_mi = make_model_input(model_imputed);
      std::ostringstream cm;
      cm << "cluster,feature,mean\n";
      for (int c = 0; c < cfg.profile.clusters; ++c) {
        for (std::size_t f = 0; f < raw_mi.feature_names.size(); ++f) {
          double sum = 0;
          std::size_t count = 0;
          for (std::size_t i = 0; i < rows.size(); ++i) {
            if (clusters.assignment[i] == c) {
              sum += raw_mi.X.at(rows[i], f);
              ++count;
            }
          }
          cm << c << ',' << raw_mi.feature_names[f] << ','
             << (count ? format_double(sum / count) : "") << '\n';
        }
      }
      out.write("profile.cluster_feature_means.csv", cm.str());
      out.write_json("profile.summary.json",
                     {{"inertia", clusters.inertia},
                      {"explained_ratio", pca.explained_ratio},
                      {"cluster_sizes", sizes},
                      {"rows_used", rows.size()}});
    }

    // ---- manifest -----------------------------------------------------------
    stage = "manifest";
    nlohmann::json config_json = cfg.to_json();
    config_json["seed"] = seed;  // effective seed, after any RISK_SEED override
    auto now = std::chrono::system_clock::now();
    auto epoch_s = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    nlohmann::json manifest = {{"tool", "smokerisk"},
                               {"tool_version", "0.1.0"},
                               {"config_hash", fnv1a_hash(config_json.dump())},
                               {"seed", seed},
                               {"threads", threads},
                               {"created_unix", epoch_s},
                               {"files", out.files},
                               {"config", config_json}};
    out.write_json("manifest.json", manifest);

    // ---- atomic publish ------------------------------------------------------
    if (fs::exists(final_dir)) {
      if (!fs::exists(final_dir / "manifest.json")) {
        throw DataError("output_dir exists and is not a previous bundle: " + final_dir.string());
      }
      fs::remove_all(final_dir);
    }
    fs::create_directories(final_dir.parent_path().empty() ? "." : final_dir.parent_path().string());
    fs::rename(tmp_dir, final_dir);

    ReportBundle bundle;
    bundle.directory = final_dir.string();
    bundle.files = out.files;
    bundle.manifest = manifest;
    return bundle;
  } catch (const ConfigError& e) {
    fs::remove_all(tmp_dir, ec);
    throw ConfigError("pipeline stage '" + stage + "': " + e.what());
  } catch (const DataError& e) {
    fs::remove_all(tmp_dir, ec);
    throw DataError("pipeline stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    fs::remove_all(tmp_dir, ec);
    throw ModelError("pipeline stage '" + stage + "': " + e.what());
  }
}

}  // namespace smokerisk
