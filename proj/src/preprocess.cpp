#include "smokerisk/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace smokerisk {

std::string to_string(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::Median: return "median";
    case ImputeStrategy::Mean: return "mean";
    case ImputeStrategy::Mode: return "mode";
    case ImputeStrategy::None: return "none";
  }
  return "none";
}

ImputeStrategy impute_strategy_from_string(const std::string& s) {
  if (s == "median") return ImputeStrategy::Median;
  if (s == "mean") return ImputeStrategy::Mean;
  if (s == "mode") return ImputeStrategy::Mode;
  if (s == "none") return ImputeStrategy::None;
  throw ConfigError("unknown impute strategy: " + s);
}

std::vector<std::pair<std::string, ImputeStrategy>> default_impute_strategies(
    const Schema& schema) {
  std::vector<std::pair<std::string, ImputeStrategy>> out;
  for (const auto& c : schema.columns) {
    if (c.kind == ColumnKind::Identifier || c.is_label) continue;
    if (c.kind == ColumnKind::Continuous) {
      out.emplace_back(c.name, ImputeStrategy::Median);
    } else {
      out.emplace_back(c.name, ImputeStrategy::Mode);
    }
  }
  return out;
}

ImputePlan fit_impute(const Table& t,
                      const std::vector<std::pair<std::string, ImputeStrategy>>& strategies) {
  ImputePlan plan;
  for (const auto& [name, strategy] : strategies) {
    int ci = t.schema.index_of(name);
    if (ci < 0) throw DataError("fit_impute: unknown column '" + name + "'");
    if (strategy == ImputeStrategy::None) continue;
    std::size_t c = static_cast<std::size_t>(ci);
    const auto& spec = t.schema.columns[c];
    if (strategy == ImputeStrategy::Mode && spec.kind == ColumnKind::Continuous) {
      throw ConfigError("fit_impute: mode strategy on continuous column '" + name + "'");
    }

    std::vector<double> vals;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (!t.miss[c][r]) vals.push_back(t.cols[c][r]);
    }
    if (vals.empty()) {
      throw DataError("fit_impute: column '" + name + "' has no observed values");
    }

    double fill = 0;
    switch (strategy) {
      case ImputeStrategy::Median: {
        std::sort(vals.begin(), vals.end());
        fill = percentile(vals, 0.5);
        break;
      }
      case ImputeStrategy::Mean: {
        double sum = 0;
        for (double v : vals) sum += v;
        fill = sum / vals.size();
        break;
      }
      case ImputeStrategy::Mode: {
        // Ties break toward the smallest encoded value.
        std::map<double, std::size_t> counts;
        for (double v : vals) ++counts[v];
        std::size_t best = 0;
        for (const auto& [v, n] : counts) {
          if (n > best) {
            best = n;
            fill = v;
          }
        }
        break;
      }
      case ImputeStrategy::None: break;
    }
    if (!std::isfinite(fill)) throw DataError("fit_impute: non-finite fill for '" + name + "'");
    plan.entries.push_back({name, strategy, fill});
  }
  return plan;
}

Table apply_impute(const Table& t, const ImputePlan& plan) {
  Table out = t;
  for (const auto& e : plan.entries) {
    int ci = out.schema.index_of(e.column);
    if (ci < 0) throw DataError("apply_impute: unknown column '" + e.column + "'");
    std::size_t c = static_cast<std::size_t>(ci);
    for (std::size_t r = 0; r < out.n_rows; ++r) {
      if (out.miss[c][r]) out.set_value(r, c, e.fill);
    }
  }
  return out;
}

nlohmann::json ImputePlan::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"column", e.column}, {"strategy", to_string(e.strategy)}, {"fill", e.fill}});
  }
  return nlohmann::json{{"impute_plan", arr}};
}

ImputePlan ImputePlan::from_json(const nlohmann::json& j) {
  ImputePlan plan;
  for (const auto& je : j.at("impute_plan")) {
    plan.entries.push_back({je.at("column").get<std::string>(),
                            impute_strategy_from_string(je.at("strategy").get<std::string>()),
                            je.at("fill").get<double>()});
  }
  return plan;
}

// =============================================================================
// Encoding
// =============================================================================

Table encode(const Table& t) {
  Table out = t;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto& spec = t.schema.columns[c];
    if (spec.kind != ColumnKind::Binary && spec.kind != ColumnKind::Ordinal) continue;

    std::set<double> distinct;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (!t.miss[c][r]) distinct.insert(t.cols[c][r]);
    }

    if (!spec.categories.empty()) {
      // Declared mapping: values must already be declared codes.
      std::set<double> declared;
      for (const auto& cat : spec.categories) declared.insert(cat.code);
      for (double v : distinct) {
        if (!declared.count(v)) {
          throw DataError("encode: column '" + spec.name + "' holds value " + format_double(v) +
                          " outside its declared category codes");
        }
      }
      continue;
    }

    if (spec.kind == ColumnKind::Binary) {
      if (distinct.size() > 2) {
        throw DataError("encode: binary column '" + spec.name + "' has " +
                        std::to_string(distinct.size()) + " distinct values");
      }
      bool already = true;
      for (double v : distinct) already = already && (v == 0.0 || v == 1.0);
      if (already) continue;
      std::map<double, double> mapping;
      double code = 0;
      for (double v : distinct) mapping[v] = code++;
      for (std::size_t r = 0; r < out.n_rows; ++r) {
        if (!out.miss[c][r]) out.cols[c][r] = mapping[out.cols[c][r]];
      }
      auto& out_spec = out.schema.columns[c];
      for (const auto& [v, k] : mapping) out_spec.categories.push_back({format_double(v), k});
    } else {
      // Ordinal: dense ranks 1..m preserving order.
      std::map<double, double> mapping;
      double rank = 1;
      for (double v : distinct) mapping[v] = rank++;
      bool identity = true;
      for (const auto& [v, k] : mapping) identity = identity && (v == k);
      if (identity) continue;
      for (std::size_t r = 0; r < out.n_rows; ++r) {
        if (!out.miss[c][r]) out.cols[c][r] = mapping[out.cols[c][r]];
      }
      auto& out_spec = out.schema.columns[c];
      for (const auto& [v, k] : mapping) out_spec.categories.push_back({format_double(v), k});
    }
  }
  return out;
}

// =============================================================================
// Standardization: z = (x - mu) / sigma
// =============================================================================

ScalerParams fit_scaler(const Table& t) {
  ScalerParams p;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto& spec = t.schema.columns[c];
    if (spec.kind != ColumnKind::Continuous || spec.is_label) continue;
    std::vector<double> vals;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (!t.miss[c][r]) vals.push_back(t.cols[c][r]);
    }
    if (vals.empty()) {
      p.skipped_zero_variance.push_back(spec.name);
      continue;
    }
    double sum = 0;
    for (double v : vals) sum += v;
    double mu = sum / vals.size();
    double ss = 0;
    for (double v : vals) ss += (v - mu) * (v - mu);
    double sigma = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
    if (sigma <= 0.0) {
      p.skipped_zero_variance.push_back(spec.name);
      continue;
    }
    p.entries.push_back({spec.name, mu, sigma});
  }
  return p;
}

Table apply_scaler(const Table& t, const ScalerParams& p) {
  Table out = t;
  for (const auto& e : p.entries) {
    int ci = out.schema.index_of(e.column);
    if (ci < 0) throw DataError("apply_scaler: unknown column '" + e.column + "'");
    std::size_t c = static_cast<std::size_t>(ci);
    for (std::size_t r = 0; r < out.n_rows; ++r) {
      if (!out.miss[c][r]) out.cols[c][r] = (out.cols[c][r] - e.mu) / e.sigma;
    }
  }
  return out;
}

nlohmann::json ScalerParams::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"column", e.column}, {"mu", e.mu}, {"sigma", e.sigma}});
  }
  return nlohmann::json{{"scaler", arr}, {"skipped_zero_variance", skipped_zero_variance}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
  ScalerParams p;
  for (const auto& je : j.at("scaler")) {
    p.entries.push_back({je.at("column").get<std::string>(), je.at("mu").get<double>(),
                         je.at("sigma").get<double>()});
  }
  if (j.contains("skipped_zero_variance")) {
    p.skipped_zero_variance = j["skipped_zero_variance"].get<std::vector<std::string>>();
  }
  return p;
}

}  // namespace smokerisk
