#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "smokerisk/pipeline.hpp"

using namespace smokerisk;

namespace {

// 0 success, 2 config error, 3 data error, 4 runtime/model error
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct SmoteOverride {
  int k = 0;
  double rate = 0;
  bool k_set = false, rate_set = false;
};

void apply_overrides(PipelineConfig& cfg, const std::string& out_dir, std::uint64_t seed,
                     bool seed_set, const SmoteOverride& smote) {
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed_set) {
    cfg.seed = seed;
    cfg.seed_set = true;
  }
  for (auto& model : cfg.models) {
    if (smote.k_set) model.smote.k = smote.k;
    if (smote.rate_set) model.smote.rate = smote.rate;
  }
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

void print_bundle(const ReportBundle& bundle) {
  std::cout << "bundle written to " << bundle.directory << " (" << bundle.files.size()
            << " files)\n";
}

int run_stage(PipelineConfig cfg, const std::string& only_stage) {
  if (only_stage != "run") {
    cfg.cv.enabled = false;
    cfg.select.enabled = false;
    cfg.weighting_study = false;
    cfg.explain.enabled = false;
    cfg.clinical.enabled = false;
    cfg.profile.enabled = false;
    if (only_stage == "evaluate") {
      cfg.cv.enabled = true;
      cfg.weighting_study = true;
    } else if (only_stage == "select") {
      cfg.select.enabled = true;
    } else if (only_stage == "explain") {
      cfg.explain.enabled = true;
    } else if (only_stage == "framingham") {
      cfg.clinical.enabled = true;
    } else if (only_stage == "cluster") {
      cfg.profile.enabled = true;
    }
  }
  print_bundle(run_pipeline(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smokerisk: smoking-risk classification toolkit for health screening data"};
  app.require_subcommand(1);

  // ---- ingest / summarize (flag-driven, no pipeline config) ----
  std::string data_path, schema_path, out_path, csv_out, mode_str = "flag";
  auto* ingest = app.add_subcommand("ingest", "Load a CSV against a schema, emit a load report");
  ingest->add_option("--data", data_path, "CSV file")->required();
  ingest->add_option("--schema", schema_path, "schema JSON")->required();
  ingest->add_option("--mode", mode_str, "plausibility mode: flag|drop_cell|reject");
  ingest->add_option("--out", out_path, "load report JSON path (default: stdout)");
  ingest->add_option("--csv-out", csv_out, "write the loaded table back out as CSV");

  auto* summ = app.add_subcommand("summarize", "Column summary statistics");
  summ->add_option("--data", data_path, "CSV file")->required();
  summ->add_option("--schema", schema_path, "schema JSON")->required();
  summ->add_option("--out", out_path, "summary CSV path (default: stdout)");

  // ---- train (single model on the full dataset) ----
  std::string model_kind = "forest", model_out;
  int trees = 100, depth = -1, min_leaf = 1, bins = 255;
  double lr = 0.1, lambda = 1.0;
  std::string weighting = "inverse_frequency";
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "Fit one model on the full dataset, save as JSON");
  train->add_option("--data", data_path)->required();
  train->add_option("--schema", schema_path)->required();
  train->add_option("--model", model_kind, "forest|gbdt_exact|gbdt_histogram|logistic|linear_svm");
  train->add_option("--out", model_out, "model JSON path")->required();
  train->add_option("--trees", trees);
  train->add_option("--depth", depth);
  train->add_option("--min-leaf", min_leaf);
  train->add_option("--bins", bins);
  train->add_option("--learning-rate", lr);
  train->add_option("--lambda", lambda);
  train->add_option("--weighting", weighting, "none|inverse_frequency|ratio");
  train->add_option("--seed", train_seed)->required();

  // ---- config-driven stages ----
  std::string config_path, out_dir;
  std::uint64_t seed_override = 0;
  SmoteOverride smote;
  auto add_config_cmd = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    cmd->add_option("--out-dir", out_dir, "override the config output_dir");
    auto* seed_opt = cmd->add_option("--seed", seed_override, "override the config seed");
    auto* k_opt = cmd->add_option("--smote-k", smote.k, "override SMOTE neighbor count");
    auto* r_opt = cmd->add_option("--smote-rate", smote.rate, "override SMOTE oversampling rate");
    cmd->callback([&, seed_opt, k_opt, r_opt, name]() {
      smote.k_set = k_opt->count() > 0;
      smote.rate_set = r_opt->count() > 0;
      PipelineConfig cfg = PipelineConfig::load(config_path);
      apply_overrides(cfg, out_dir, seed_override, seed_opt->count() > 0, smote);
      run_stage(std::move(cfg), name);
    });
    return cmd;
  };
  add_config_cmd("run", "Run the full pipeline, write a report bundle");
  add_config_cmd("evaluate", "Cross-validated model evaluation and weighting study");
  add_config_cmd("select", "Boruta feature selection");
  add_config_cmd("explain", "SHAP attribution for the configured model");
  add_config_cmd("framingham", "Framingham risk categories and disease sub-models");
  add_config_cmd("cluster", "PCA + K-Means patient profiling");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Validate a pipeline config, list every problem");
  validate->add_option("config", validate_path, "pipeline config JSON")->required();

  try {
    app.parse(argc, argv);
    if (ingest->parsed()) {
      Schema schema = Schema::load(schema_path);
      PlausibilityMode mode = mode_str == "drop_cell" ? PlausibilityMode::DropCell
                              : mode_str == "reject"  ? PlausibilityMode::Reject
                                                      : PlausibilityMode::Flag;
      if (mode_str != "flag" && mode_str != "drop_cell" && mode_str != "reject") {
        throw ConfigError("unknown plausibility mode: " + mode_str);
      }
      LoadReport report;
      Table t = load_csv(data_path, schema, mode, &report);
      write_or_print(out_path, report.to_json().dump(2) + "\n");
      if (!csv_out.empty()) write_csv(t, csv_out);
    } else if (summ->parsed()) {
      Schema schema = Schema::load(schema_path);
      Table t = load_csv(data_path, schema, PlausibilityMode::Flag);
      write_or_print(out_path, summarize(t).to_csv());
    } else if (train->parsed()) {
      Schema schema = Schema::load(schema_path);
      Table t = load_csv(data_path, schema, PlausibilityMode::Flag);
      Table prepped = encode(t);
      prepped = apply_impute(prepped, fit_impute(prepped, default_impute_strategies(prepped.schema)));
      prepped = apply_scaler(prepped, fit_scaler(prepped));
      ModelInput mi = make_model_input(prepped);
      ModelSpec spec;
      spec.name = model_kind;
      spec.kind = model_kind_from_string(model_kind);
      spec.fit.n_trees = trees;
      spec.fit.max_depth = depth;
      spec.fit.min_samples_leaf = min_leaf;
      spec.fit.n_bins = bins;
      spec.fit.learning_rate = lr;
      spec.fit.l2_leaf_penalty = lambda;
      if (weighting == "none") {
        spec.weighting = WeightMode::None;
      } else if (weighting == "inverse_frequency") {
        spec.weighting = WeightMode::InverseFrequency;
      } else if (weighting == "ratio") {
        spec.weighting = WeightMode::Ratio;
      } else {
        throw ConfigError("unknown weighting mode: " + weighting);
      }
      FittedModel model = fit_model(spec, mi.X, mi.y, mi.feature_names, train_seed, 0);
      write_or_print(model_out, model.to_json().dump() + "\n");
      std::cout << "model written to " << model_out << "\n";
    } else if (validate->parsed()) {
      ValidationReport report = validate_config(validate_path);
      if (report.ok()) {
        std::cout << "config ok\n";
        return 0;
      }
      for (const auto& e : report.errors) std::cout << "error: " << e << "\n";
      return kExitConfig;
    }
    // config-driven subcommands run inside their callbacks
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
