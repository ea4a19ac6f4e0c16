#include "smokerisk/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smokerisk {

namespace {
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}

// =============================================================================
// EnsembleModel
// =============================================================================

double EnsembleModel::raw_score(const double* x) const {
  if (kind == EnsembleKind::Boosted) {
    double s = base_score;
    for (const auto& t : trees) s += learning_rate * t.predict_row(x);
    return s;
  }
  double s = 0;
  for (const auto& t : trees) s += t.predict_row(x);
  return trees.empty() ? 0.0 : s / static_cast<double>(trees.size());
}

double EnsembleModel::proba(const double* x) const {
  double raw = raw_score(x);
  return kind == EnsembleKind::Boosted ? sigmoid(raw) : raw;
}

std::vector<double> EnsembleModel::predict_proba(const Matrix& X, int threads) const {
  if (X.cols != feature_names.size() && !feature_names.empty()) {
    throw ModelError("predict_proba: expected " + std::to_string(feature_names.size()) +
                     " features, got " + std::to_string(X.cols));
  }
  std::vector<double> out(X.rows);
  parallel_for(X.rows, threads, [&](std::size_t r) { out[r] = proba(X.row(r)); });
  return out;
}

nlohmann::json EnsembleModel::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : trees) jt.push_back(t.to_json());
  return nlohmann::json{{"format_version", 1},
                        {"kind", kind == EnsembleKind::Forest ? "forest" : "boosted"},
                        {"learning_rate", learning_rate},
                        {"base_score", base_score},
                        {"feature_names", feature_names},
                        {"tree_seeds", tree_seeds},
                        {"trees", jt}};
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1) throw ModelError("ensemble json: unsupported version");
  EnsembleModel m;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "forest") {
    m.kind = EnsembleKind::Forest;
  } else if (kind == "boosted") {
    m.kind = EnsembleKind::Boosted;
  } else {
    throw ModelError("ensemble json: unknown kind '" + kind + "'");
  }
  m.learning_rate = j.value("learning_rate", 0.0);
  m.base_score = j.value("base_score", 0.0);
  if (j.contains("feature_names")) m.feature_names = j["feature_names"].get<std::vector<std::string>>();
  if (j.contains("tree_seeds")) m.tree_seeds = j["tree_seeds"].get<std::vector<std::uint64_t>>();
  for (const auto& jt : j.at("trees")) m.trees.push_back(Tree::from_json(jt));
  return m;
}

// =============================================================================
// Random forest
// =============================================================================

EnsembleModel fit_forest(const Matrix& X, std::span<const int> y, const FitConfig& cfg,
                         const std::vector<std::string>& feature_names, int threads,
                         std::vector<double>* importance) {
  cfg.validate();
  if (X.rows == 0) throw DataError("fit_forest: empty input");

  FitConfig tree_cfg = cfg;
  if (cfg.feature_subsample <= 0.0) {
    // auto: sqrt(m) features per split
    double m = static_cast<double>(X.cols);
    tree_cfg.feature_subsample = std::min(1.0, std::max(1.0, std::floor(std::sqrt(m))) / m);
  }
  auto weights = cfg.class_weights.per_sample(y);

  EnsembleModel model;
  model.kind = EnsembleKind::Forest;
  model.feature_names = feature_names;
  model.trees.resize(cfg.n_trees);
  model.tree_seeds.resize(cfg.n_trees);
  for (int t = 0; t < cfg.n_trees; ++t) model.tree_seeds[t] = derive_seed(cfg.seed, t);

  std::vector<std::vector<double>> per_tree_importance;
  if (importance) per_tree_importance.assign(cfg.n_trees, {});

  parallel_for(cfg.n_trees, threads, [&](std::size_t t) {
    Rng rng(model.tree_seeds[t]);
    std::uint64_t tree_seed = rng.next_u64();

    if (cfg.bootstrap) {
      std::vector<std::size_t> sample(X.rows);
      for (std::size_t i = 0; i < X.rows; ++i) sample[i] = rng.below(X.rows);
      Matrix Xb(X.rows, X.cols);
      std::vector<int> yb(X.rows);
      std::vector<double> wb(X.rows);
      for (std::size_t i = 0; i < X.rows; ++i) {
        std::copy_n(X.row(sample[i]), X.cols, Xb.row(i));
        yb[i] = y[sample[i]];
        wb[i] = weights[sample[i]];
      }
      model.trees[t] = fit_tree(Xb, yb, wb, tree_cfg, tree_seed,
                                importance ? &per_tree_importance[t] : nullptr);
    } else {
      model.trees[t] = fit_tree(X, y, weights, tree_cfg, tree_seed,
                                importance ? &per_tree_importance[t] : nullptr);
    }
  });

  if (importance) {
    importance->assign(X.cols, 0.0);
    for (const auto& imp : per_tree_importance) {
      for (std::size_t f = 0; f < X.cols; ++f) (*importance)[f] += imp[f];
    }
    for (auto& v : *importance) v /= cfg.n_trees;
  }
  return model;
}

// =============================================================================
// Gradient boosting
//
// Depth-wise growth. Each level makes one pass per feature over the rows (in
// presorted order for exact search, by bin for histograms), accumulating
// per-node gradient/hessian sums and keeping the best split per node.
// =============================================================================

namespace {

struct GbdtSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  int bin = -1;
};

struct NodeStats {
  double g = 0, h = 0;
  std::size_t count = 0;
};

inline double leaf_objective(double g, double h, double lambda) {
  return g * g / (h + lambda);
}

struct GbdtWorkspace {
  std::vector<int> node_of;                 // row -> active node slot, -1 if settled
  std::vector<std::vector<std::size_t>> sorted_rows;  // per feature, rows by ascending value
  // histogram mode
  std::vector<std::vector<double>> cuts;    // per feature ascending cut points
  std::vector<std::vector<std::uint16_t>> bins;  // per feature, per row
};

// Quantile cut points; midpoints between neighbouring distinct values so no
// cut coincides with a data value.
std::vector<double> quantile_cuts(const Matrix& X, int feature, int n_bins) {
  std::vector<double> vals(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) vals[r] = X.at(r, feature);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  std::vector<double> cuts;
  if (vals.size() <= 1) return cuts;
  std::size_t max_cuts = std::min<std::size_t>(n_bins - 1, vals.size() - 1);
  for (std::size_t c = 1; c <= max_cuts; ++c) {
    std::size_t pos = c * vals.size() / (max_cuts + 1);
    pos = std::clamp<std::size_t>(pos, 1, vals.size() - 1);
    double cut = vals[pos - 1] + 0.5 * (vals[pos] - vals[pos - 1]);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

}  // namespace

EnsembleModel fit_gbdt(const Matrix& X, std::span<const int> y, const FitConfig& cfg,
                       SplitSearch search, const std::vector<std::string>& feature_names,
                       int threads) {
  cfg.validate();
  if (X.rows == 0) throw DataError("fit_gbdt: empty input");
  const std::size_t n = X.rows;
  const std::size_t m = X.cols;
  const double lambda = cfg.l2_leaf_penalty;
  const double pos_scale = cfg.class_weights.positive_scale;
  const int max_depth = cfg.max_depth < 0 ? 6 : cfg.max_depth;
  const std::size_t min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);

  EnsembleModel model;
  model.kind = EnsembleKind::Boosted;
  model.learning_rate = cfg.learning_rate;
  model.feature_names = feature_names;

  // Weighted log-odds prior.
  double wsum = 0, wpos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = y[i] == 1 ? pos_scale : 1.0;
    wsum += w;
    if (y[i] == 1) wpos += w;
  }
  double p0 = std::clamp(wpos / wsum, 1e-12, 1.0 - 1e-12);
  model.base_score = std::log(p0 / (1.0 - p0));

  GbdtWorkspace ws;
  ws.node_of.resize(n);
  if (search == SplitSearch::Exact) {
    ws.sorted_rows.resize(m);
    parallel_for(m, threads, [&](std::size_t f) {
      auto& order = ws.sorted_rows[f];
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return X.at(a, f) < X.at(b, f); });
    });
  } else {
    ws.cuts.resize(m);
    ws.bins.resize(m);
    parallel_for(m, threads, [&](std::size_t f) {
      ws.cuts[f] = quantile_cuts(X, static_cast<int>(f), cfg.n_bins);
      ws.bins[f].resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        ws.bins[f][r] = static_cast<std::uint16_t>(
            std::upper_bound(ws.cuts[f].begin(), ws.cuts[f].end(), X.at(r, f)) -
            ws.cuts[f].begin());
      }
    });
  }

  std::vector<double> score(n, model.base_score);
  std::vector<double> grad(n), hess(n);

  for (int round = 0; round < cfg.n_trees; ++round) {
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = y[i] == 1 ? pos_scale : 1.0;
      double p = sigmoid(score[i]);
      grad[i] = w * (p - y[i]);
      hess[i] = w * p * (1.0 - p);
      loss -= w * (y[i] == 1 ? std::log(std::max(p, 1e-300))
                             : std::log(std::max(1.0 - p, 1e-300)));
    }
    loss /= wsum;
    if (!std::isfinite(loss)) {
      throw ModelError("fit_gbdt: non-finite training loss at round " + std::to_string(round));
    }
    model.training_loss.push_back(loss);

    Tree tree;
    tree.nodes.emplace_back();

    // Active node slots for the current level; node_of maps rows to slots.
    std::vector<int> level_nodes = {0};
    std::fill(ws.node_of.begin(), ws.node_of.end(), 0);

    std::vector<NodeStats> stats(1);
    for (std::size_t i = 0; i < n; ++i) {
      stats[0].g += grad[i];
      stats[0].h += hess[i];
      ++stats[0].count;
    }
    tree.nodes[0].weighted_count = static_cast<double>(stats[0].count);

    for (int depth = 0; depth < max_depth && !level_nodes.empty(); ++depth) {
      const std::size_t n_active = level_nodes.size();
      std::vector<std::vector<GbdtSplit>> per_feature(m, std::vector<GbdtSplit>(n_active));

      if (search == SplitSearch::Exact) {
        parallel_for(m, threads, [&](std::size_t f) {
          auto& bests = per_feature[f];
          std::vector<NodeStats> left(n_active);
          std::vector<double> last_value(n_active);
          std::vector<bool> seen(n_active, false);
          for (std::size_t r : ws.sorted_rows[f]) {
            int slot = ws.node_of[r];
            if (slot < 0) continue;
            double v = X.at(r, f);
            auto& acc = left[slot];
            if (seen[slot] && v != last_value[slot] && acc.count >= min_leaf) {
              const auto& tot = stats[slot];
              if (tot.count - acc.count >= min_leaf) {
                double gain = leaf_objective(acc.g, acc.h, lambda) +
                              leaf_objective(tot.g - acc.g, tot.h - acc.h, lambda) -
                              leaf_objective(tot.g, tot.h, lambda);
                if (gain > bests[slot].gain) {
                  bests[slot].gain = gain;
                  bests[slot].feature = static_cast<int>(f);
                  bests[slot].threshold = last_value[slot] + 0.5 * (v - last_value[slot]);
                }
              }
            }
            acc.g += grad[r];
            acc.h += hess[r];
            ++acc.count;
            last_value[slot] = v;
            seen[slot] = true;
          }
        });
      } else {
        parallel_for(m, threads, [&](std::size_t f) {
          auto& bests = per_feature[f];
          const std::size_t n_bins_f = ws.cuts[f].size() + 1;
          if (n_bins_f < 2) return;
          std::vector<NodeStats> hist(n_active * n_bins_f);
          for (std::size_t r = 0; r < n; ++r) {
            int slot = ws.node_of[r];
            if (slot < 0) continue;
            auto& cell = hist[slot * n_bins_f + ws.bins[f][r]];
            cell.g += grad[r];
            cell.h += hess[r];
            ++cell.count;
          }
          for (std::size_t s = 0; s < n_active; ++s) {
            const auto& tot = stats[s];
            NodeStats acc;
            for (std::size_t b = 0; b + 1 < n_bins_f; ++b) {
              const auto& cell = hist[s * n_bins_f + b];
              acc.g += cell.g;
              acc.h += cell.h;
              acc.count += cell.count;
              if (acc.count < min_leaf || tot.count - acc.count < min_leaf) continue;
              double gain = leaf_objective(acc.g, acc.h, lambda) +
                            leaf_objective(tot.g - acc.g, tot.h - acc.h, lambda) -
                            leaf_objective(tot.g, tot.h, lambda);
              if (gain > bests[s].gain) {
                bests[s].gain = gain;
                bests[s].feature = static_cast<int>(f);
                bests[s].threshold = ws.cuts[f][b];
                bests[s].bin = static_cast<int>(b);
              }
            }
          }
        });
      }

      // Reduce across features in ascending order (deterministic ties).
      std::vector<GbdtSplit> chosen(n_active);
      for (std::size_t f = 0; f < m; ++f) {
        for (std::size_t s = 0; s < n_active; ++s) {
          if (per_feature[f][s].gain > chosen[s].gain) chosen[s] = per_feature[f][s];
        }
      }

      // Materialize accepted splits.
      std::vector<int> next_level;
      std::vector<NodeStats> next_stats;
      bool any_split = false;
      for (std::size_t s = 0; s < n_active; ++s) {
        int node_id = level_nodes[s];
        if (chosen[s].feature < 0 || chosen[s].gain <= 1e-12) continue;
        any_split = true;
        int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        int right_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        auto& nd = tree.nodes[node_id];
        nd.feature = chosen[s].feature;
        nd.threshold = chosen[s].threshold;
        nd.left = left_id;
        nd.right = right_id;
        next_level.push_back(left_id);
        next_stats.emplace_back();
        next_level.push_back(right_id);
        next_stats.emplace_back();
      }
      if (!any_split) break;

      // Route rows to children and rebuild stats.
      std::vector<int> new_slot_of_node(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < next_level.size(); ++s) new_slot_of_node[next_level[s]] = static_cast<int>(s);
      for (std::size_t r = 0; r < n; ++r) {
        int slot = ws.node_of[r];
        if (slot < 0) continue;
        int node_id = level_nodes[slot];
        const auto& nd = tree.nodes[node_id];
        if (nd.is_leaf()) {
          ws.node_of[r] = -1;
          continue;
        }
        int child = X.at(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
        int child_slot = new_slot_of_node[child];
        ws.node_of[r] = child_slot;
        auto& st = next_stats[child_slot];
        st.g += grad[r];
        st.h += hess[r];
        ++st.count;
      }
      for (std::size_t s = 0; s < next_level.size(); ++s) {
        tree.nodes[next_level[s]].weighted_count = static_cast<double>(next_stats[s].count);
      }
      level_nodes = std::move(next_level);
      stats = std::move(next_stats);
    }

    // Leaf values and score update. Rebuild per-node sums from scratch so
    // settled leaves from earlier levels are covered too.
    std::vector<double> leaf_g(tree.nodes.size(), 0.0), leaf_h(tree.nodes.size(), 0.0);
    std::vector<int> leaf_of(n);
    for (std::size_t r = 0; r < n; ++r) {
      int nd = 0;
      while (!tree.nodes[nd].is_leaf()) {
        nd = X.at(r, tree.nodes[nd].feature) <= tree.nodes[nd].threshold ? tree.nodes[nd].left
                                                                         : tree.nodes[nd].right;
      }
      leaf_of[r] = nd;
      leaf_g[nd] += grad[r];
      leaf_h[nd] += hess[r];
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].is_leaf()) {
        tree.nodes[i].value = -leaf_g[i] / (leaf_h[i] + lambda);
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      score[r] += cfg.learning_rate * tree.nodes[leaf_of[r]].value;
    }
    model.trees.push_back(std::move(tree));
  }

  // Final loss for the non-increasing diagnostics.
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = y[i] == 1 ? pos_scale : 1.0;
    double p = sigmoid(score[i]);
    loss -= w * (y[i] == 1 ? std::log(std::max(p, 1e-300)) : std::log(std::max(1.0 - p, 1e-300)));
  }
  model.training_loss.push_back(loss / wsum);
  return model;
}

}  // namespace smokerisk
