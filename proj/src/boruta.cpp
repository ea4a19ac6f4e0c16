#include "smokerisk/boruta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smokerisk {

double binomial_tail_geq(int hits, int n) {
  if (hits <= 0) return 1.0;
  if (hits > n) return 0.0;
  double total = 0.0;
  for (int k = hits; k <= n; ++k) {
    double log_term = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                      n * std::log(2.0);
    total += std::exp(log_term);
  }
  return std::min(total, 1.0);
}

double binomial_tail_leq(int hits, int n) {
  if (hits >= n) return 1.0;
  if (hits < 0) return 0.0;
  return binomial_tail_geq(n - hits, n);
}

BorutaResult boruta(const Matrix& X, std::span<const int> y,
                    const std::vector<std::string>& feature_names, const BorutaConfig& cfg,
                    int threads) {
  if (X.cols == 0) throw DataError("boruta: no candidate features");
  if (feature_names.size() != X.cols) throw DataError("boruta: feature name count mismatch");
  if (cfg.max_iterations < 1) throw ConfigError("boruta: max_iterations must be >= 1");
  if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw ConfigError("boruta: alpha must be in (0,1)");

  const std::size_t m0 = X.cols;
  enum class State { Tentative, Confirmed, Rejected };
  std::vector<State> state(m0, State::Tentative);

  BorutaResult res;
  res.candidates = feature_names;
  res.hits.assign(m0, 0);

  // Bonferroni across the original candidate set.
  const double level = cfg.alpha / (2.0 * static_cast<double>(m0));

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    std::vector<std::size_t> active;
    bool any_tentative = false;
    for (std::size_t f = 0; f < m0; ++f) {
      if (state[f] != State::Rejected) active.push_back(f);
      if (state[f] == State::Tentative) any_tentative = true;
    }
    if (!any_tentative) break;
    ++res.iterations_run;

    // Candidates plus one permuted shadow per candidate.
    Rng rng(derive_seed(cfg.seed, 0xb0 + iter));
    Matrix Xa(X.rows, 2 * active.size());
    std::vector<std::size_t> perm(X.rows);
    for (std::size_t j = 0; j < active.size(); ++j) {
      std::size_t f = active[j];
      for (std::size_t r = 0; r < X.rows; ++r) Xa.at(r, j) = X.at(r, f);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      for (std::size_t r = 0; r < X.rows; ++r) {
        Xa.at(r, active.size() + j) = X.at(perm[r], f);
      }
    }

    FitConfig forest_cfg = cfg.forest;
    forest_cfg.seed = derive_seed(cfg.seed, 0xf0 + iter);
    std::vector<double> importance;
    fit_forest(Xa, y, forest_cfg, {}, threads, &importance);

    double shadow_max = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      shadow_max = std::max(shadow_max, importance[active.size() + j]);
    }

    BorutaResult::IterationRecord record;
    record.shadow_max = shadow_max;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (importance[j] > shadow_max) {
        ++res.hits[active[j]];
        record.hit_features.push_back(feature_names[active[j]]);
      }
    }
    res.history.push_back(std::move(record));

    int n = res.iterations_run;
    for (std::size_t f = 0; f < m0; ++f) {
      if (state[f] != State::Tentative) continue;
      if (binomial_tail_geq(res.hits[f], n) < level) {
        state[f] = State::Confirmed;
      } else if (binomial_tail_leq(res.hits[f], n) < level) {
        state[f] = State::Rejected;
      }
    }
  }

  for (std::size_t f = 0; f < m0; ++f) {
    switch (state[f]) {
      case State::Confirmed: res.confirmed.push_back(feature_names[f]); break;
      case State::Rejected: res.rejected.push_back(feature_names[f]); break;
      case State::Tentative: res.tentative.push_back(feature_names[f]); break;
    }
  }
  return res;
}

Table select_apply(const Table& t, const BorutaResult& result, bool keep_tentative) {
  std::vector<std::string> keep = result.confirmed;
  if (keep_tentative) keep.insert(keep.end(), result.tentative.begin(), result.tentative.end());
  if (keep.empty()) throw DataError("select_apply: empty selection");
  for (const auto& name : keep) {
    if (t.schema.index_of(name) < 0) throw DataError("select_apply: unknown feature '" + name + "'");
  }
  std::vector<std::string> names;
  for (const auto& c : t.schema.columns) {
    bool carried = c.is_label || c.kind == ColumnKind::Identifier;
    bool selected = std::find(keep.begin(), keep.end(), c.name) != keep.end();
    if (carried || selected) names.push_back(c.name);
  }
  return t.select_columns(names);
}

nlohmann::json BorutaResult::to_json() const {
  nlohmann::json jhits = nlohmann::json::object();
  for (std::size_t f = 0; f < candidates.size(); ++f) jhits[candidates[f]] = hits[f];
  nlohmann::json jhist = nlohmann::json::array();
  for (const auto& rec : history) {
    jhist.push_back({{"shadow_max", rec.shadow_max}, {"hits", rec.hit_features}});
  }
  return nlohmann::json{{"confirmed", confirmed}, {"rejected", rejected},
                        {"tentative", tentative}, {"candidates", candidates},
                        {"hits", jhits},          {"iterations_run", iterations_run},
                        {"history", jhist}};
}

BorutaResult BorutaResult::from_json(const nlohmann::json& j) {
  BorutaResult res;
  res.confirmed = j.at("confirmed").get<std::vector<std::string>>();
  res.rejected = j.at("rejected").get<std::vector<std::string>>();
  res.tentative = j.at("tentative").get<std::vector<std::string>>();
  res.candidates = j.at("candidates").get<std::vector<std::string>>();
  res.iterations_run = j.value("iterations_run", 0);
  res.hits.assign(res.candidates.size(), 0);
  if (j.contains("hits")) {
    for (std::size_t f = 0; f < res.candidates.size(); ++f) {
      if (j["hits"].contains(res.candidates[f])) res.hits[f] = j["hits"][res.candidates[f]].get<int>();
    }
  }
  return res;
}

}  // namespace smokerisk
