#include "smokerisk/linear.hpp"

#include <algorithm>
#include <cmath>

namespace smokerisk {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LossGrad {
  double loss = 0;
  std::vector<double> gw;
  double gb = 0;
};

// Weighted logistic loss and its gradient.
LossGrad logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> w,
                       const std::vector<double>& weights, double bias, double l2) {
  LossGrad out;
  out.gw.assign(X.cols, 0.0);
  double wsum = 0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double* xi = X.row(i);
    double z = bias;
    for (std::size_t f = 0; f < X.cols; ++f) z += weights[f] * xi[f];
    double p = sigmoid(z);
    double wi = w[i];
    wsum += wi;
    out.loss -= wi * (y[i] == 1 ? std::log(std::max(p, 1e-300))
                                : std::log(std::max(1.0 - p, 1e-300)));
    double r = wi * (p - y[i]);
    for (std::size_t f = 0; f < X.cols; ++f) out.gw[f] += r * xi[f];
    out.gb += r;
  }
  for (std::size_t f = 0; f < X.cols; ++f) {
    out.loss += 0.5 * l2 * weights[f] * weights[f] * wsum;
    out.gw[f] = out.gw[f] / wsum + l2 * weights[f];
  }
  out.loss /= wsum;
  out.gb /= wsum;
  return out;
}

// Weighted hinge loss (labels in {-1,+1}) and a sub-gradient.
LossGrad hinge_loss(const Matrix& X, std::span<const int> y, std::span<const double> w,
                    const std::vector<double>& weights, double bias, double l2) {
  LossGrad out;
  out.gw.assign(X.cols, 0.0);
  double wsum = 0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double* xi = X.row(i);
    double z = bias;
    for (std::size_t f = 0; f < X.cols; ++f) z += weights[f] * xi[f];
    double yi = y[i] == 1 ? 1.0 : -1.0;
    double wi = w[i];
    wsum += wi;
    double margin = yi * z;
    if (margin < 1.0) {
      out.loss += wi * (1.0 - margin);
      for (std::size_t f = 0; f < X.cols; ++f) out.gw[f] -= wi * yi * xi[f];
      out.gb -= wi * yi;
    }
  }
  for (std::size_t f = 0; f < X.cols; ++f) {
    out.loss += 0.5 * l2 * weights[f] * weights[f] * wsum;
    out.gw[f] = out.gw[f] / wsum + l2 * weights[f];
  }
  out.loss /= wsum;
  out.gb /= wsum;
  return out;
}

using LossFn = LossGrad (*)(const Matrix&, std::span<const int>, std::span<const double>,
                            const std::vector<double>&, double, double);

LinearModel descend(const Matrix& X, std::span<const int> y, const LinearFitConfig& cfg,
                    LinearKind kind, LossFn loss_fn, const std::vector<std::string>& names) {
  if (X.rows == 0) throw DataError("linear fit: empty input");
  if (y.size() != X.rows) throw DataError("linear fit: row count mismatch");
  if (cfg.max_iterations < 1) throw ConfigError("linear fit: max_iterations must be >= 1");

  auto w = cfg.class_weights.per_sample(y);

  LinearModel model;
  model.kind = kind;
  model.feature_names = names;
  model.weights.assign(X.cols, 0.0);
  model.bias = 0.0;

  double step = cfg.step_size;
  LossGrad cur = loss_fn(X, y, w, model.weights, model.bias, cfg.l2);
  int rising = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::vector<double> next_w = model.weights;
    for (std::size_t f = 0; f < X.cols; ++f) next_w[f] -= step * cur.gw[f];
    double next_b = model.bias - step * cur.gb;
    LossGrad next = loss_fn(X, y, w, next_w, next_b, cfg.l2);

    if (!std::isfinite(next.loss)) {
      throw ModelError("linear fit: non-finite loss at iteration " + std::to_string(it));
    }
    if (next.loss > cur.loss + 1e-15) {
      // Overshoot: halve the step and retry from the same point.
      step *= 0.5;
      if (++rising > cfg.patience) {
        throw ModelError("linear fit diverged: loss rose " + std::to_string(rising) +
                         " consecutive times (loss=" + format_double(cur.loss) +
                         ", step=" + format_double(step) + ")");
      }
      continue;
    }
    rising = 0;
    double delta = cur.loss - next.loss;
    model.weights = std::move(next_w);
    model.bias = next_b;
    cur = std::move(next);
    model.iterations = it + 1;
    if (delta < cfg.tol) {
      model.converged = true;
      break;
    }
  }
  model.final_loss = cur.loss;
  return model;
}

}  // namespace

LinearModel fit_logreg(const Matrix& X, std::span<const int> y, const LinearFitConfig& cfg,
                       const std::vector<std::string>& feature_names) {
  return descend(X, y, cfg, LinearKind::Logistic, logistic_loss, feature_names);
}

LinearModel fit_linear_svm(const Matrix& X, std::span<const int> y, const LinearFitConfig& cfg,
                           const std::vector<std::string>& feature_names) {
  return descend(X, y, cfg, LinearKind::LinearSvm, hinge_loss, feature_names);
}

double LinearModel::decision(const double* x) const {
  double z = bias;
  for (std::size_t f = 0; f < weights.size(); ++f) z += weights[f] * x[f];
  return z;
}

std::vector<double> LinearModel::predict_proba(const Matrix& X) const {
  if (X.cols != weights.size()) {
    throw ModelError("predict_proba: expected " + std::to_string(weights.size()) +
                     " features, got " + std::to_string(X.cols));
  }
  std::vector<double> out(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) out[r] = sigmoid(decision(X.row(r)));
  return out;
}

nlohmann::json LinearModel::to_json() const {
  return nlohmann::json{{"format_version", 1},
                        {"kind", kind == LinearKind::Logistic ? "logistic" : "linear_svm"},
                        {"weights", weights},
                        {"bias", bias},
                        {"converged", converged},
                        {"iterations", iterations},
                        {"feature_names", feature_names}};
}

LinearModel LinearModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1) throw ModelError("linear json: unsupported version");
  LinearModel m;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "logistic") {
    m.kind = LinearKind::Logistic;
  } else if (kind == "linear_svm") {
    m.kind = LinearKind::LinearSvm;
  } else {
    throw ModelError("linear json: unknown kind '" + kind + "'");
  }
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.converged = j.value("converged", false);
  m.iterations = j.value("iterations", 0);
  if (j.contains("feature_names")) m.feature_names = j["feature_names"].get<std::vector<std::string>>();
  return m;
}

}  // namespace smokerisk
