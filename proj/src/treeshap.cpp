#include "smokerisk/treeshap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace smokerisk {

// =============================================================================
// Polynomial-time exact SHAP for trees.
//
// The recursion keeps a path of unique features with, per element, the
// fraction of subset-paths that flow through when the feature is excluded
// (zero_fraction, from training covers) or included (one_fraction, 0/1 from
// the instance), plus the permutation weight mass (pweight).
// =============================================================================

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, int unique_depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[unique_depth] = {feature, zero_fraction, one_fraction,
                        unique_depth == 0 ? 1.0 : 0.0};
  for (int i = unique_depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1.0) / (unique_depth + 1.0);
    path[i].pweight = zero_fraction * path[i].pweight * (unique_depth - i) / (unique_depth + 1.0);
  }
}

void unwind_path(PathElement* path, int unique_depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction);
      next_one_portion = tmp - path[i].pweight * zero_fraction * (unique_depth - i) /
                                   (unique_depth + 1.0);
    } else {
      path[i].pweight = path[i].pweight * (unique_depth + 1.0) /
                        (zero_fraction * (unique_depth - i));
    }
  }
  for (int i = index; i < unique_depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const PathElement* path, int unique_depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  double total = 0.0;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction * (unique_depth - i) /
                                               (unique_depth + 1.0);
    } else {
      total += path[i].pweight / zero_fraction * (unique_depth + 1.0) / (unique_depth - i);
    }
  }
  return total;
}

void shap_recurse(const Tree& tree, const double* x, double* phi, int node_index,
                  int unique_depth, PathElement* parent_path, double parent_zero_fraction,
                  double parent_one_fraction, int parent_feature) {
  PathElement* path = parent_path + unique_depth + 1;
  std::copy(parent_path, parent_path + unique_depth + 1, path);
  extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction, parent_feature);

  const TreeNode& node = tree.nodes[node_index];
  if (node.is_leaf()) {
    for (int i = 1; i <= unique_depth; ++i) {
      const double w = unwound_path_sum(path, unique_depth, i);
      phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * node.value;
    }
    return;
  }

  if (!(node.weighted_count > 0.0)) {
    throw ModelError("tree_shap: node without positive weighted_count");
  }
  const int hot = x[node.feature] <= node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_zero = tree.nodes[hot].weighted_count / node.weighted_count;
  const double cold_zero = tree.nodes[cold].weighted_count / node.weighted_count;

  // A feature met twice on the path resumes its previous fractions.
  double incoming_zero = 1.0, incoming_one = 1.0;
  int prev = 0;
  while (prev <= unique_depth && path[prev].feature != node.feature) ++prev;
  if (prev <= unique_depth) {
    incoming_zero = path[prev].zero_fraction;
    incoming_one = path[prev].one_fraction;
    unwind_path(path, unique_depth, prev);
    --unique_depth;
  }

  shap_recurse(tree, x, phi, hot, unique_depth + 1, path, hot_zero * incoming_zero, incoming_one,
               node.feature);
  shap_recurse(tree, x, phi, cold, unique_depth + 1, path, cold_zero * incoming_zero, 0.0,
               node.feature);
}

}  // namespace

double tree_expected_value(const Tree& tree) {
  // cover-weighted mean over leaves
  double root_cover = tree.nodes[0].weighted_count;
  if (!(root_cover > 0)) throw ModelError("tree_shap: root weighted_count must be positive");
  double sum = 0.0;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) sum += n.weighted_count * n.value;
  }
  return sum / root_cover;
}

ShapVector tree_shap(const Tree& tree, const double* x, std::size_t n_features) {
  ShapVector out;
  out.values.assign(n_features, 0.0);
  out.base_value = tree_expected_value(tree);
  int depth = tree.depth();
  // one path copy per recursion level
  std::vector<PathElement> buffer((depth + 2) * (depth + 3) / 2 + 1);
  shap_recurse(tree, x, out.values.data(), 0, 0, buffer.data(), 1.0, 1.0, -1);
  return out;
}

ShapVector tree_shap(const EnsembleModel& model, const double* x) {
  if (model.trees.empty()) throw ModelError("tree_shap: model has no trees");
  const std::size_t m = model.feature_names.size();
  if (m == 0) throw ModelError("tree_shap: model carries no feature names");

  ShapVector out;
  out.values.assign(m, 0.0);
  for (const auto& tree : model.trees) {
    ShapVector per = tree_shap(tree, x, m);
    for (std::size_t f = 0; f < m; ++f) out.values[f] += per.values[f];
    out.base_value += per.base_value;
  }
  if (model.kind == EnsembleKind::Forest) {
    double inv = 1.0 / static_cast<double>(model.trees.size());
    for (auto& v : out.values) v *= inv;
    out.base_value *= inv;
  } else {
    for (auto& v : out.values) v *= model.learning_rate;
    out.base_value = model.base_score + model.learning_rate * out.base_value;
  }
  return out;
}

ShapMatrix shap_matrix(const EnsembleModel& model, const Matrix& X, int threads) {
  if (X.rows == 0) throw DataError("shap_matrix: empty input");
  ShapMatrix out;
  out.feature_names = model.feature_names;
  out.values = Matrix(X.rows, model.feature_names.size());
  std::vector<double> bases(X.rows);
  parallel_for(X.rows, threads, [&](std::size_t r) {
    ShapVector sv = tree_shap(model, X.row(r));
    std::copy(sv.values.begin(), sv.values.end(), out.values.row(r));
    bases[r] = sv.base_value;
  });
  out.base_value = bases.empty() ? 0.0 : bases[0];
  return out;
}

ImportanceRanking rank_importance(const ShapMatrix& shap) {
  const std::size_t m = shap.feature_names.size();
  std::vector<double> mean_abs(m, 0.0);
  for (std::size_t r = 0; r < shap.values.rows; ++r) {
    for (std::size_t f = 0; f < m; ++f) mean_abs[f] += std::fabs(shap.values.at(r, f));
  }
  for (auto& v : mean_abs) v /= static_cast<double>(shap.values.rows);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean_abs[a] > mean_abs[b]; });

  double total = std::accumulate(mean_abs.begin(), mean_abs.end(), 0.0);
  ImportanceRanking ranking;
  double cum = 0.0;
  for (std::size_t f : order) {
    cum += mean_abs[f];
    ranking.items.push_back(
        {shap.feature_names[f], mean_abs[f], total > 0 ? cum / total : 0.0});
  }
  return ranking;
}

ShapSummary shap_summary(const EnsembleModel& model, const Matrix& X, int threads) {
  ShapSummary out;
  out.shap = shap_matrix(model, X, threads);
  out.ranking = rank_importance(out.shap);
  return out;
}

// =============================================================================
// Physiological-system grouping
// =============================================================================

SystemMap SystemMap::from_json(const nlohmann::json& j) {
  SystemMap map;
  const auto& systems = j.at("systems");
  for (auto it = systems.begin(); it != systems.end(); ++it) {
    auto features = it.value().get<std::vector<std::string>>();
    if (features.empty()) throw ConfigError("system map: system '" + it.key() + "' is empty");
    map.systems.emplace_back(it.key(), std::move(features));
  }
  std::set<std::string> seen;
  for (const auto& [system, features] : map.systems) {
    for (const auto& f : features) {
      if (!seen.insert(f).second) {
        throw ConfigError("system map: feature '" + f + "' assigned to more than one system");
      }
    }
  }
  return map;
}

SystemMap SystemMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open system map: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("system map parse error: ") + e.what());
  }
  return from_json(j);
}

std::vector<std::pair<std::string, double>> group_importance(const ImportanceRanking& ranking,
                                                             const SystemMap& map) {
  std::map<std::string, std::string> system_of;
  for (const auto& [system, features] : map.systems) {
    for (const auto& f : features) system_of[f] = system;
  }
  std::vector<std::string> unmapped;
  std::map<std::string, std::pair<double, std::size_t>> acc;  // sum, count
  for (const auto& item : ranking.items) {
    auto it = system_of.find(item.feature);
    if (it == system_of.end()) {
      unmapped.push_back(item.feature);
      continue;
    }
    auto& a = acc[it->second];
    a.first += item.mean_abs_shap;
    a.second += 1;
  }
  if (!unmapped.empty()) {
    std::string msg = "group_importance: unmapped feature(s):";
    for (const auto& f : unmapped) msg += " '" + f + "'";
    throw ConfigError(msg);
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [system, a] : acc) out.emplace_back(system, a.first / a.second);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  return out;
}

// =============================================================================
// Partial dependence
// =============================================================================

DependenceGrid dependence_grid(const EnsembleModel& model, const Matrix& X, int feature_a,
                               int feature_b, const GridSpec& grid, int threads) {
  if (X.rows == 0) throw DataError("dependence_grid: empty dataset");
  if (grid.steps_a < 1 || grid.steps_b < 1) throw ConfigError("dependence_grid: empty grid");
  const int m = static_cast<int>(X.cols);
  if (feature_a < 0 || feature_a >= m || feature_b < 0 || feature_b >= m) {
    throw ConfigError("dependence_grid: feature index out of range");
  }

  DependenceGrid out;
  out.feature_a = model.feature_names.empty() ? std::to_string(feature_a)
                                              : model.feature_names[feature_a];
  out.feature_b = model.feature_names.empty() ? std::to_string(feature_b)
                                              : model.feature_names[feature_b];
  auto axis = [](double lo, double hi, int steps) {
    std::vector<double> v(steps);
    for (int i = 0; i < steps; ++i) {
      v[i] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
    }
    return v;
  };
  out.axis_a = axis(grid.min_a, grid.max_a, grid.steps_a);
  out.axis_b = axis(grid.min_b, grid.max_b, grid.steps_b);
  out.mean_prediction = Matrix(grid.steps_a, grid.steps_b);

  parallel_for(static_cast<std::size_t>(grid.steps_a), threads, [&](std::size_t ia) {
    std::vector<double> row(X.cols);
    for (int ib = 0; ib < grid.steps_b; ++ib) {
      double sum = 0.0;
      for (std::size_t r = 0; r < X.rows; ++r) {
        std::copy_n(X.row(r), X.cols, row.data());
        row[feature_a] = out.axis_a[ia];
        row[feature_b] = out.axis_b[ib];
        sum += model.proba(row.data());
      }
      out.mean_prediction.at(ia, ib) = sum / static_cast<double>(X.rows);
    }
  });
  return out;
}

std::string DependenceGrid::to_csv() const {
  std::ostringstream out;
  out << feature_a << ',' << feature_b << ",mean_prediction\n";
  for (std::size_t ia = 0; ia < axis_a.size(); ++ia) {
    for (std::size_t ib = 0; ib < axis_b.size(); ++ib) {
      out << format_double(axis_a[ia]) << ',' << format_double(axis_b[ib]) << ','
          << format_double(mean_prediction.at(ia, ib)) << '\n';
    }
  }
  return out.str();
}

}  // namespace smokerisk
