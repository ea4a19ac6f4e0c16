#include "smokerisk/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smokerisk {

void FitConfig::validate() const {
  if (n_trees < 1) throw ConfigError("fit config: n_trees must be >= 1");
  if (max_depth < -1 || max_depth == 0) throw ConfigError("fit config: max_depth must be -1 or >= 1");
  if (min_samples_leaf < 1) throw ConfigError("fit config: min_samples_leaf must be >= 1");
  if (feature_subsample < 0.0 || feature_subsample > 1.0)
    throw ConfigError("fit config: feature_subsample must be in (0,1] (0 = auto)");
  if (learning_rate <= 0.0 || learning_rate > 1.0)
    throw ConfigError("fit config: learning_rate must be in (0,1]");
  if (l2_leaf_penalty < 0.0) throw ConfigError("fit config: l2_leaf_penalty must be >= 0");
  if (n_bins < 2) throw ConfigError("fit config: n_bins must be >= 2");
}

nlohmann::json FitConfig::to_json() const {
  return nlohmann::json{{"n_trees", n_trees},
                        {"max_depth", max_depth},
                        {"min_samples_leaf", min_samples_leaf},
                        {"feature_subsample", feature_subsample},
                        {"learning_rate", learning_rate},
                        {"l2_leaf_penalty", l2_leaf_penalty},
                        {"n_bins", n_bins},
                        {"seed", seed},
                        {"bootstrap", bootstrap},
                        {"w_pos", class_weights.w_pos},
                        {"w_neg", class_weights.w_neg},
                        {"positive_scale", class_weights.positive_scale}};
}

FitConfig FitConfig::from_json(const nlohmann::json& j) {
  FitConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.feature_subsample = j.value("feature_subsample", c.feature_subsample);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2_leaf_penalty = j.value("l2_leaf_penalty", c.l2_leaf_penalty);
  c.n_bins = j.value("n_bins", c.n_bins);
  c.seed = j.value("seed", c.seed);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.class_weights.w_pos = j.value("w_pos", 1.0);
  c.class_weights.w_neg = j.value("w_neg", 1.0);
  c.class_weights.positive_scale = j.value("positive_scale", 1.0);
  c.validate();
  return c;
}

double Tree::predict_row(const double* x) const {
  int n = 0;
  while (!nodes[n].is_leaf()) {
    n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
  }
  return nodes[n].value;
}

int Tree::depth() const {
  // Iterative depth over the index-linked structure.
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    // children always come after their parent in the vector
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
    best = std::max(best, d[i]);
  }
  return best;
}

nlohmann::json Tree::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& n : nodes) {
    arr.push_back({{"f", n.feature},
                   {"t", n.threshold},
                   {"l", n.left},
                   {"r", n.right},
                   {"v", n.value},
                   {"w", n.weighted_count}});
  }
  return nlohmann::json{{"nodes", arr}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& jn : j.at("nodes")) {
    TreeNode n;
    n.feature = jn.at("f").get<int>();
    n.threshold = jn.at("t").get<double>();
    n.left = jn.at("l").get<int>();
    n.right = jn.at("r").get<int>();
    n.value = jn.at("v").get<double>();
    n.weighted_count = jn.at("w").get<double>();
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) throw ModelError("tree json: no nodes");
  return t;
}

// =============================================================================
// CART fitting
// =============================================================================

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct BuildContext {
  const Matrix& X;
  std::span<const int> y;
  std::span<const double> w;
  const FitConfig& cfg;
  Rng rng;
  std::vector<double>* importance;
  // scratch, reused across nodes
  std::vector<std::pair<double, std::size_t>> sorted;
  std::vector<int> feature_pool;
};

std::size_t features_per_split(const FitConfig& cfg, std::size_t m) {
  double frac = cfg.feature_subsample;
  if (frac <= 0.0) return m;  // auto for plain trees = all features
  std::size_t k = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(m)));
  return std::clamp<std::size_t>(k, 1, m);
}

// Chooses the candidate feature set for one split, in ascending index order.
std::vector<int> sample_features(BuildContext& ctx, std::size_t m_try) {
  const std::size_t m = ctx.X.cols;
  if (m_try >= m) {
    std::vector<int> all(m);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  auto& pool = ctx.feature_pool;
  pool.resize(m);
  std::iota(pool.begin(), pool.end(), 0);
  // partial Fisher-Yates, then sort the chosen prefix
  for (std::size_t i = 0; i < m_try; ++i) {
    std::size_t j = i + ctx.rng.below(m - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + m_try);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Weighted Gini score to maximize: sum_c W_c^2 / W for each side.
inline double side_score(double wp, double wn) {
  double total = wp + wn;
  return total > 0 ? (wp * wp + wn * wn) / total : 0.0;
}

SplitCandidate best_split(BuildContext& ctx, const std::vector<std::size_t>& idx,
                          double wp_total, double wn_total) {
  const double parent_score = side_score(wp_total, wn_total);
  const std::size_t n = idx.size();
  const std::size_t min_leaf = static_cast<std::size_t>(ctx.cfg.min_samples_leaf);

  // Zero-gain splits are kept as long as a valid cut exists: an impure node
  // may need an uninformative-looking cut before a useful one appears below
  // (the XOR situation). Purity and constant features still stop growth.
  SplitCandidate best;
  auto features = sample_features(ctx, features_per_split(ctx.cfg, ctx.X.cols));
  auto& sorted = ctx.sorted;
  sorted.resize(n);

  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {ctx.X.at(idx[i], f), idx[i]};
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (sorted.front().first == sorted.back().first) continue;  // constant feature

    double wp_left = 0, wn_left = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::size_t r = sorted[i].second;
      if (ctx.y[r] == 1) {
        wp_left += ctx.w[r];
      } else {
        wn_left += ctx.w[r];
      }
      if (sorted[i].first == sorted[i + 1].first) continue;
      if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;

      double gain = side_score(wp_left, wn_left) +
                    side_score(wp_total - wp_left, wn_total - wn_left) - parent_score;
      if (gain < 0.0) gain = 0.0;  // exact arithmetic would never go negative
      if (best.feature < 0 || gain > best.gain) {
        best.gain = gain;
        best.feature = f;
        best.threshold = sorted[i].first + 0.5 * (sorted[i + 1].first - sorted[i].first);
      }
    }
  }
  return best;
}

void build_node(BuildContext& ctx, Tree& tree, int node_index, std::vector<std::size_t>& idx,
                int depth) {
  double wp = 0, wn = 0;
  for (std::size_t r : idx) {
    if (ctx.y[r] == 1) {
      wp += ctx.w[r];
    } else {
      wn += ctx.w[r];
    }
  }
  TreeNode& node = tree.nodes[node_index];
  node.weighted_count = wp + wn;
  node.value = node.weighted_count > 0 ? wp / node.weighted_count : 0.0;

  bool depth_stop = ctx.cfg.max_depth >= 0 && depth >= ctx.cfg.max_depth;
  bool size_stop = idx.size() < 2 * static_cast<std::size_t>(ctx.cfg.min_samples_leaf);
  bool pure = (wp == 0.0 || wn == 0.0);
  if (depth_stop || size_stop || pure) return;

  SplitCandidate split = best_split(ctx, idx, wp, wn);
  if (split.feature < 0) return;

  if (ctx.importance) (*ctx.importance)[split.feature] += split.gain;

  std::vector<std::size_t> left_idx, right_idx;
  left_idx.reserve(idx.size());
  right_idx.reserve(idx.size());
  for (std::size_t r : idx) {
    (ctx.X.at(r, split.feature) <= split.threshold ? left_idx : right_idx).push_back(r);
  }
  idx.clear();
  idx.shrink_to_fit();

  int left = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  int right = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  auto& n2 = tree.nodes[node_index];  // emplace may have reallocated
  n2.feature = split.feature;
  n2.threshold = split.threshold;
  n2.left = left;
  n2.right = right;

  build_node(ctx, tree, left, left_idx, depth + 1);
  build_node(ctx, tree, right, right_idx, depth + 1);
}

}  // namespace

Tree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> sample_weights,
              const FitConfig& cfg, std::uint64_t seed, std::vector<double>* importance) {
  cfg.validate();
  if (X.rows == 0) throw DataError("fit_tree: empty input");
  if (y.size() != X.rows || sample_weights.size() != X.rows)
    throw DataError("fit_tree: row count mismatch");
  for (double w : sample_weights) {
    if (!(w > 0)) throw DataError("fit_tree: sample weights must be positive");
  }
  if (importance) importance->assign(X.cols, 0.0);

  BuildContext ctx{X, y, sample_weights, cfg, Rng(seed), importance, {}, {}};
  Tree tree;
  tree.nodes.emplace_back();
  std::vector<std::size_t> idx(X.rows);
  std::iota(idx.begin(), idx.end(), 0);
  build_node(ctx, tree, 0, idx, 0);
  return tree;
}

}  // namespace smokerisk
