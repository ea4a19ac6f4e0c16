#pragma once

#include <string>
#include <vector>

#include "smokerisk/table.hpp"

namespace smokerisk {

enum class ImputeStrategy { Median, Mean, Mode, None };

std::string to_string(ImputeStrategy s);
ImputeStrategy impute_strategy_from_string(const std::string& s);

// Fitted fill values; fit on the training fold, apply anywhere.
struct ImputePlan {
  struct Entry {
    std::string column;
    ImputeStrategy strategy = ImputeStrategy::None;
    double fill = 0.0;
  };
  std::vector<Entry> entries;

  nlohmann::json to_json() const;
  static ImputePlan from_json(const nlohmann::json& j);
};

// Median for continuous, mode for binary/ordinal; identifiers and the label
// are left alone.
std::vector<std::pair<std::string, ImputeStrategy>> default_impute_strategies(
    const Schema& schema);

ImputePlan fit_impute(const Table& t,
                      const std::vector<std::pair<std::string, ImputeStrategy>>& strategies);
Table apply_impute(const Table& t, const ImputePlan& plan);

// Categorical encoding. Binary columns map to {0,1}; columns with a declared
// category mapping keep their declared codes; ordinal columns without one are
// mapped to dense ranks 1..m. Idempotent.
Table encode(const Table& t);

struct ScalerParams {
  struct Entry {
    std::string column;
    double mu = 0.0;
    double sigma = 1.0;
  };
  std::vector<Entry> entries;
  std::vector<std::string> skipped_zero_variance;

  nlohmann::json to_json() const;
  static ScalerParams from_json(const nlohmann::json& j);
};

ScalerParams fit_scaler(const Table& t);
Table apply_scaler(const Table& t, const ScalerParams& p);

}  // namespace smokerisk
