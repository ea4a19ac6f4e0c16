#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smokerisk/boruta.hpp"
#include "smokerisk/clinical.hpp"
#include "smokerisk/cross_validation.hpp"
#include "smokerisk/profile.hpp"
#include "smokerisk/treeshap.hpp"

namespace smokerisk {

struct PipelineConfig {
  std::string config_dir;  // directory of the config file, for relative paths
  std::string dataset;
  std::string schema_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  PlausibilityMode plausibility = PlausibilityMode::Flag;
  bool impute = true;
  bool standardize = true;

  struct SelectStage {
    bool enabled = false;
    double alpha = 0.05;
    int max_iterations = 100;
    FitConfig forest;
    bool apply = false;
    bool keep_tentative = false;
  } select;

  std::vector<ModelSpec> models;

  struct CvStage {
    bool enabled = true;
    int k = 10;
    double threshold = 0.5;
    bool holdout = false;
    double holdout_fraction = 0.2;
  } cv;

  bool weighting_study = false;

  struct ExplainStage {
    bool enabled = false;
    std::string model;  // name from `models`; must be a tree ensemble
    std::size_t rows = 1000;
    std::string system_map_path;
    bool dependence = false;
    std::string dependence_a = "age";
    std::string dependence_b = "bmi";
    int dependence_steps = 20;
    std::size_t dependence_rows = 500;
  } explain;

  struct ClinicalStage {
    bool enabled = false;
    std::string points_table_path;
    std::string rules_path;
    std::vector<std::string> diseases;  // empty = all rules in the file
    std::vector<std::string> model_kinds = {"forest"};
    int cv_k = 10;
  } clinical;

  struct ProfileStage {
    bool enabled = false;
    int components = 2;
    int clusters = 4;
    int restarts = 8;
    std::size_t rows = 0;  // 0 = all rows
    bool full_space = false;
  } profile;

  static PipelineConfig from_json(const nlohmann::json& j, const std::string& config_dir);
  static PipelineConfig load(const std::string& path);
  nlohmann::json to_json() const;  // canonical resolved form (hashing + manifest)
  std::string resolve(const std::string& path) const;

  // RISK_SEED environment override, else the config seed.
  std::uint64_t effective_seed() const;
};

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Collects every config problem (parse issues aside) instead of stopping at
// the first: missing files, absent seeds, bad ranges, fold counts exceeding
// class sizes.
ValidationReport validate_config(const std::string& path);

struct ReportBundle {
  std::string directory;
  std::vector<std::string> files;  // relative to directory
  nlohmann::json manifest;
};

// Full pipeline: ingest -> preprocess -> (select) -> CV train/eval ->
// explain -> clinical -> profile. The bundle lands atomically (staged in a
// temp directory, renamed on success); a failed run leaves nothing behind.
ReportBundle run_pipeline(const PipelineConfig& cfg);

}  // namespace smokerisk
