#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "smokerisk/table.hpp"
#include "support/datagen.hpp"

using namespace smokerisk;

namespace {

Schema tiny_schema() {
  Schema s;
  s.columns.push_back({"id", ColumnKind::Identifier, "", std::nullopt, false, {}});
  s.columns.push_back({"ldl", ColumnKind::Continuous, "mg/dL", std::make_pair(1.0, 1860.0), false, {}});
  s.columns.push_back({"flag", ColumnKind::Binary, "", std::nullopt, true, {}});
  return s;
}

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_csv clean input") {
  auto path = write_temp("t_clean.csv", "id,ldl,flag\n1,100,0\n2,200,1\n3,300,0\n");
  LoadReport report;
  Table t = load_csv(path, tiny_schema(), PlausibilityMode::Flag, &report);
  CHECK(t.n_rows == 3);
  CHECK(report.out_of_range.empty());
  CHECK(report.missing_cells == 0);
  CHECK(t.value(1, 1) == 200.0);
}

TEST_CASE("load_csv header order-insensitive, unknown column rejected") {
  auto path = write_temp("t_order.csv", "flag,id,ldl\n0,1,100\n");
  Table t = load_csv(path, tiny_schema(), PlausibilityMode::Flag);
  CHECK(t.value(0, 1) == 100.0);

  auto bad = write_temp("t_bad.csv", "id,ldl,flag,extra\n1,2,0,9\n");
  CHECK_THROWS_AS(load_csv(bad, tiny_schema(), PlausibilityMode::Flag), DataError);
}

TEST_CASE("cell at the declared range edge is retained, not flagged") {
  // LDL max 1860 is a legitimate extreme, inside the declared range
  auto path = write_temp("t_edge.csv", "id,ldl,flag\n1,1860,0\n2,100,1\n");
  LoadReport report;
  Table t = load_csv(path, tiny_schema(), PlausibilityMode::Flag, &report);
  CHECK(report.out_of_range.empty());
  CHECK(t.value(0, 1) == 1860.0);
}

TEST_CASE("out-of-range cell: flag retains, drop_cell blanks, reject throws") {
  auto path = write_temp("t_oor.csv", "id,ldl,flag\n1,2000,0\n2,100,1\n");

  LoadReport report;
  Table flagged = load_csv(path, tiny_schema(), PlausibilityMode::Flag, &report);
  REQUIRE(report.out_of_range.size() == 1);
  CHECK(report.out_of_range[0].column == "ldl");
  CHECK(report.out_of_range[0].row == 0);
  CHECK(flagged.value(0, 1) == 2000.0);  // retained

  Table dropped = load_csv(path, tiny_schema(), PlausibilityMode::DropCell, &report);
  CHECK(dropped.is_missing(0, 1));
  CHECK(report.out_of_range.size() == 1);

  CHECK_THROWS_AS(load_csv(path, tiny_schema(), PlausibilityMode::Reject), DataError);
}

TEST_CASE("malformed row reports its number; missing cells masked") {
  auto bad = write_temp("t_malformed.csv", "id,ldl,flag\n1,100\n");
  CHECK_THROWS_WITH_AS(load_csv(bad, tiny_schema(), PlausibilityMode::Flag),
                       doctest::Contains("row 1"), DataError);

  auto path = write_temp("t_missing.csv", "id,ldl,flag\n1,,0\n2,150,\n");
  LoadReport report;
  Table t = load_csv(path, tiny_schema(), PlausibilityMode::Flag, &report);
  CHECK(t.is_missing(0, 1));
  CHECK(t.is_missing(1, 2));
  CHECK(report.missing_cells == 2);
}

TEST_CASE("category labels parse through the declared mapping") {
  Schema s = tiny_schema();
  s.columns[2].categories = {{"N", 0.0}, {"Y", 1.0}};
  auto path = write_temp("t_cat.csv", "id,ldl,flag\n1,100,Y\n2,110,N\n");
  Table t = load_csv(path, s, PlausibilityMode::Flag);
  CHECK(t.value(0, 2) == 1.0);
  CHECK(t.value(1, 2) == 0.0);

  auto bad = write_temp("t_cat_bad.csv", "id,ldl,flag\n1,100,Q\n");
  CHECK_THROWS_AS(load_csv(bad, s, PlausibilityMode::Flag), DataError);
}

TEST_CASE("csv round-trip preserves values and missing mask") {
  Table t = testing::synthetic_screening_table(120, 7);
  // knock out some cells
  t.set_missing(3, 2);
  t.set_missing(50, 10);
  t.set_missing(119, 25);

  auto path = (std::filesystem::temp_directory_path() / "t_roundtrip.csv").string();
  write_csv(t, path);
  Table back = load_csv(path, t.schema, PlausibilityMode::Flag);

  REQUIRE(back.n_rows == t.n_rows);
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      REQUIRE(back.is_missing(r, c) == t.is_missing(r, c));
      if (!t.is_missing(r, c)) REQUIRE(back.value(r, c) == t.value(r, c));
    }
  }
}

TEST_CASE("summarize: closed-form checks") {
  Schema s;
  s.columns.push_back({"x", ColumnKind::Continuous, "", std::nullopt, false, {}});
  Table t = Table::empty(s, 4);
  for (std::size_t r = 0; r < 4; ++r) t.set_value(r, 0, static_cast<double>(r + 1));
  auto stats = summarize(t);
  REQUIRE(stats.columns.size() == 1);
  CHECK(stats.columns[0].mean == doctest::Approx(2.5));
  CHECK(stats.columns[0].p50 == doctest::Approx(2.5));
  CHECK(stats.columns[0].min == 1.0);
  CHECK(stats.columns[0].max == 4.0);
  CHECK(stats.columns[0].n_unique == 4);
}

TEST_CASE("summarize: constant column and all-missing column") {
  Schema s;
  s.columns.push_back({"c", ColumnKind::Continuous, "", std::nullopt, false, {}});
  s.columns.push_back({"gone", ColumnKind::Continuous, "", std::nullopt, false, {}});
  Table t = Table::empty(s, 3);
  for (std::size_t r = 0; r < 3; ++r) t.set_value(r, 0, 5.0);

  auto stats = summarize(t);
  CHECK(stats.columns[0].stddev == 0.0);
  CHECK(stats.columns[0].min == 5.0);
  CHECK(stats.columns[0].max == 5.0);
  CHECK_FALSE(stats.columns[1].defined);
  CHECK(std::isnan(stats.columns[1].mean));
  CHECK(stats.columns[1].missing_count == 3);
  CHECK(stats.columns[1].missing_rate == doctest::Approx(1.0));
}

TEST_CASE("summarize is permutation-invariant over rows") {
  Table t = testing::synthetic_screening_table(60, 11);
  std::vector<std::size_t> perm(t.n_rows);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37 + 11) % perm.size();
  Table shuffled = t.select_rows(perm);

  auto a = summarize(t);
  auto b = summarize(shuffled);
  for (std::size_t c = 0; c < a.columns.size(); ++c) {
    if (!a.columns[c].defined) continue;
    CHECK(a.columns[c].mean == doctest::Approx(b.columns[c].mean));
    CHECK(a.columns[c].stddev == doctest::Approx(b.columns[c].stddev));
    CHECK(a.columns[c].p25 == doctest::Approx(b.columns[c].p25));
    CHECK(a.columns[c].p75 == doctest::Approx(b.columns[c].p75));
  }
}

TEST_CASE("percentile is monotone nondecreasing in p") {
  Rng rng(21);
  std::vector<double> vals(37);
  for (auto& v : vals) v = rng.next_real01() * 10.0;
  std::sort(vals.begin(), vals.end());
  double prev = -1e300;
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    double q = percentile(vals, p);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("schema invariants enforced") {
  Schema dup;
  dup.columns.push_back({"x", ColumnKind::Continuous, "", std::nullopt, false, {}});
  dup.columns.push_back({"x", ColumnKind::Continuous, "", std::nullopt, false, {}});
  CHECK_THROWS_AS(dup.validate(), ConfigError);

  Schema bad_range;
  bad_range.columns.push_back({"x", ColumnKind::Continuous, "", std::make_pair(5.0, 1.0), false, {}});
  CHECK_THROWS_AS(bad_range.validate(), ConfigError);

  Schema two_labels;
  two_labels.columns.push_back({"a", ColumnKind::Binary, "", std::nullopt, true, {}});
  two_labels.columns.push_back({"b", ColumnKind::Binary, "", std::nullopt, true, {}});
  CHECK_THROWS_AS(two_labels.validate(), ConfigError);
}

TEST_CASE("schema json round-trip") {
  Schema s = testing::screening_schema();
  Schema back = Schema::from_json(s.to_json());
  REQUIRE(back.columns.size() == s.columns.size());
  for (std::size_t i = 0; i < s.columns.size(); ++i) {
    CHECK(back.columns[i].name == s.columns[i].name);
    CHECK(back.columns[i].kind == s.columns[i].kind);
    CHECK(back.columns[i].is_label == s.columns[i].is_label);
    CHECK(back.columns[i].valid_range == s.columns[i].valid_range);
  }
}

TEST_CASE("model input excludes identifier and label, rejects missing cells") {
  Table t = testing::synthetic_screening_table(40, 3);
  ModelInput mi = make_model_input(t);
  CHECK(mi.X.cols == t.n_cols() - 2);
  CHECK(mi.y.size() == 40);
  for (const auto& name : mi.feature_names) {
    CHECK(name != "ID");
    CHECK(name != "smoking");
  }

  t.set_missing(5, t.schema.index_of("HDL"));
  CHECK_THROWS_AS(make_model_input(t), DataError);
}
