#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "smokerisk/pipeline.hpp"
#include "support/datagen.hpp"

using namespace smokerisk;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox(const std::string& name) {
    dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json base_config(const Sandbox& box, std::size_t rows, std::uint64_t seed) {
  Table t = testing::synthetic_screening_table(rows, 1234);
  write_csv(t, box.path("data.csv"));
  std::string root = testing::source_root();
  nlohmann::json models = nlohmann::json::array();
  models.push_back({{"name", "random_forest"},
                    {"kind", "forest"},
                    {"n_trees", 8},
                    {"max_depth", 8},
                    {"min_samples_leaf", 3},
                    {"weighting", "inverse_frequency"}});
  return nlohmann::json{
      {"dataset", box.path("data.csv")},
      {"schema", root + "/data/schema/screening_schema.json"},
      {"output_dir", box.path("out")},
      {"seed", seed},
      {"threads", 2},
      {"models", models},
      {"cv", {{"k", 2}}},
  };
}

std::string write_config(const Sandbox& box, const nlohmann::json& j, const std::string& name) {
  std::ofstream out(box.path(name));
  out << j.dump(2);
  return box.path(name);
}

}  // namespace

TEST_CASE("minimal config: smoke run produces a 2-fold report bundle") {
  Sandbox box("smokerisk_pipe_smoke");
  nlohmann::json cfg = base_config(box, 150, 5);
  PipelineConfig pc = PipelineConfig::load(write_config(box, cfg, "cfg.json"));
  ReportBundle bundle = run_pipeline(pc);

  CHECK(fs::exists(box.path("out/manifest.json")));
  CHECK(fs::exists(box.path("out/evaluate.cv_report.json")));
  CHECK(fs::exists(box.path("out/evaluate.cv_metrics.csv")));
  CHECK(fs::exists(box.path("out/ingest.summary.csv")));
  // no partial temp directory left behind
  CHECK_FALSE(fs::exists(box.path("out.tmp")));

  auto report = nlohmann::json::parse(read_file(box.path("out/evaluate.cv_report.json")));
  CHECK(report["k"] == 2);
  CHECK(report["models"].contains("random_forest"));
  REQUIRE(report["models"]["random_forest"]["folds"].size() == 2);
  // every bundle file listed in the manifest exists
  for (const auto& f : bundle.manifest["files"]) {
    CHECK(fs::exists(box.path("out/" + f.get<std::string>())));
  }
}

TEST_CASE("identical config and seed give byte-identical metric csvs") {
  Sandbox box("smokerisk_pipe_deter");
  nlohmann::json cfg = base_config(box, 200, 42);
  cfg["profile"] = {{"enabled", true}, {"components", 2}, {"clusters", 3}, {"restarts", 3}};
  cfg["explain"] = {{"enabled", true}, {"model", "random_forest"}, {"rows", 50},
                    {"dependence", {{"enabled", false}}}};

  cfg["output_dir"] = box.path("out1");
  run_pipeline(PipelineConfig::load(write_config(box, cfg, "cfg1.json")));
  cfg["output_dir"] = box.path("out2");
  run_pipeline(PipelineConfig::load(write_config(box, cfg, "cfg2.json")));

  for (const std::string name :
       {"evaluate.cv_metrics.csv", "ingest.summary.csv", "profile.pca_scores.csv",
        "explain.importance.csv", "stats.correlation.csv"}) {
    CHECK(read_file(box.path("out1/" + name)) == read_file(box.path("out2/" + name)));
  }
}

TEST_CASE("RISK_SEED environment variable overrides the config seed") {
  Sandbox box("smokerisk_pipe_env");
  nlohmann::json cfg = base_config(box, 120, 1);
  PipelineConfig pc = PipelineConfig::load(write_config(box, cfg, "cfg.json"));
  CHECK(pc.effective_seed() == 1);
  setenv("RISK_SEED", "777", 1);
  CHECK(pc.effective_seed() == 777);
  setenv("RISK_SEED", "notanumber", 1);
  CHECK_THROWS_AS(pc.effective_seed(), ConfigError);
  unsetenv("RISK_SEED");
}

TEST_CASE("aborted run leaves no partial bundle") {
  Sandbox box("smokerisk_pipe_abort");
  nlohmann::json cfg = base_config(box, 120, 3);
  // explain names a model that does not exist -> the explain stage throws
  cfg["explain"] = {{"name_intentionally_bad", true},
                    {"enabled", true},
                    {"model", "no_such_model"}};
  PipelineConfig pc = PipelineConfig::load(write_config(box, cfg, "cfg.json"));
  CHECK_THROWS_AS(run_pipeline(pc), ConfigError);
  CHECK_FALSE(fs::exists(box.path("out")));
  CHECK_FALSE(fs::exists(box.path("out.tmp")));
}

TEST_CASE("full pipeline with every stage enabled runs end to end") {
  Sandbox box("smokerisk_pipe_full");
  nlohmann::json cfg = base_config(box, 260, 9);
  std::string root = testing::source_root();
  cfg["weighting_study"] = true;
  cfg["select"] = {{"enabled", true}, {"alpha", 0.05}, {"max_iterations", 8},
                   {"n_trees", 8},   {"max_depth", 5}, {"apply", false}};
  cfg["explain"] = {{"enabled", true},
                    {"model", "random_forest"},
                    {"rows", 40},
                    {"system_map", root + "/data/explain/system_map.json"},
                    {"dependence",
                     {{"enabled", true}, {"feature_a", "age"}, {"feature_b", "bmi"},
                      {"steps", 5}, {"rows", 40}}}};
  // cardiovascular has plenty of cases in the fixture; kidney is too rare for
  // CV at this size and must degrade to an empty-AUC row instead of failing
  cfg["clinical"] = {{"enabled", true},
                     {"points_table", root + "/data/clinical/framingham_points.json"},
                     {"disease_rules", root + "/data/clinical/disease_rules.json"},
                     {"diseases", {"cardiovascular", "kidney"}},
                     {"cv_k", 10}};
  cfg["profile"] = {{"enabled", true}, {"components", 2}, {"clusters", 4}, {"restarts", 2}};

  ReportBundle bundle = run_pipeline(PipelineConfig::load(write_config(box, cfg, "cfg.json")));
  for (const std::string name :
       {"select.boruta.json", "evaluate.weighting_impact.json", "explain.system_importance.csv",
        "explain.dependence.csv", "clinical.framingham_distribution.csv",
        "clinical.disease_models.csv", "profile.cluster_feature_means.csv", "manifest.json"}) {
    CHECK(fs::exists(box.path("out/" + name)));
  }
  // cardiovascular ran CV; kidney had too few cases and reports empty AUC cells
  std::string disease_csv = read_file(box.path("out/clinical.disease_models.csv"));
  CHECK(disease_csv.find("cardiovascular,forest,0.") != std::string::npos);
  CHECK(disease_csv.find("kidney,forest,,,") != std::string::npos);
  CHECK(bundle.manifest["config_hash"].is_number());
  // manifest embeds the full resolved config for re-runs
  CHECK(bundle.manifest["config"]["cv"]["k"] == 2);
}

TEST_CASE("validate_config lists every problem instead of stopping at the first") {
  Sandbox box("smokerisk_pipe_validate");
  nlohmann::json cfg = base_config(box, 60, 7);
  cfg.erase("seed");
  cfg["dataset"] = box.path("missing.csv");
  cfg["cv"]["k"] = 1;
  cfg["models"][0]["n_trees"] = 0;
  std::string path = write_config(box, cfg, "bad.json");

  ValidationReport report = validate_config(path);
  CHECK_FALSE(report.ok());
  CHECK(report.errors.size() >= 4);
  auto joined = [&] {
    std::string all;
    for (const auto& e : report.errors) all += e + "\n";
    return all;
  }();
  CHECK(joined.find("seed") != std::string::npos);
  CHECK(joined.find("missing.csv") != std::string::npos);
  CHECK(joined.find("cv.k") != std::string::npos);
  CHECK(joined.find("n_trees") != std::string::npos);
}

TEST_CASE("validate_config flags k larger than the minority class with counts") {
  Sandbox box("smokerisk_pipe_validate_k");
  Table t = testing::synthetic_screening_table(40, 50);
  // keep only 3 positive rows
  int label = t.schema.label_index();
  int kept = 0;
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    if (t.value(r, label) == 1.0) {
      if (++kept > 3) t.set_value(r, label, 0.0);
    }
  }
  write_csv(t, box.path("data.csv"));
  nlohmann::json cfg = base_config(box, 10, 7);  // rewrites data.csv...
  write_csv(t, box.path("data.csv"));            // ...so restore ours
  cfg["cv"]["k"] = 8;
  ValidationReport report = validate_config(write_config(box, cfg, "cfg.json"));
  bool found = false;
  for (const auto& e : report.errors) {
    found = found || (e.find("minority") != std::string::npos && e.find("3") != std::string::npos);
  }
  CHECK(found);
}

TEST_CASE("valid config passes validation") {
  Sandbox box("smokerisk_pipe_validate_ok");
  nlohmann::json cfg = base_config(box, 80, 7);
  ValidationReport report = validate_config(write_config(box, cfg, "cfg.json"));
  for (const auto& e : report.errors) MESSAGE(e);
  CHECK(report.ok());
}

TEST_CASE("overwriting a previous bundle works; a foreign directory is refused") {
  Sandbox box("smokerisk_pipe_overwrite");
  nlohmann::json cfg = base_config(box, 100, 11);
  std::string path = write_config(box, cfg, "cfg.json");
  run_pipeline(PipelineConfig::load(path));
  run_pipeline(PipelineConfig::load(path));  // second publish replaces the first
  CHECK(fs::exists(box.path("out/manifest.json")));

  fs::create_directories(box.path("precious"));
  std::ofstream(box.path("precious/keep.txt")) << "do not delete";
  cfg["output_dir"] = box.path("precious");
  PipelineConfig pc = PipelineConfig::load(write_config(box, cfg, "cfg2.json"));
  CHECK_THROWS_AS(run_pipeline(pc), DataError);
  CHECK(fs::exists(box.path("precious/keep.txt")));
}

TEST_CASE("config hash is stable across loads and changes with content") {
  Sandbox box("smokerisk_pipe_hash");
  nlohmann::json cfg = base_config(box, 60, 13);
  std::string p1 = write_config(box, cfg, "a.json");
  PipelineConfig c1 = PipelineConfig::load(p1);
  PipelineConfig c2 = PipelineConfig::load(p1);
  CHECK(fnv1a_hash(c1.to_json().dump()) == fnv1a_hash(c2.to_json().dump()));
  cfg["seed"] = 14;
  PipelineConfig c3 = PipelineConfig::load(write_config(box, cfg, "b.json"));
  CHECK(fnv1a_hash(c1.to_json().dump()) != fnv1a_hash(c3.to_json().dump()));
}
