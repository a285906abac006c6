#include "moje/logistic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "moje/error.hpp"

namespace moje {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double dot(std::span<const double> w, const FeatureVector& v) {
  double s = 0.0;
  for (const auto& e : v.entries) s += w[e.index] * e.value;
  return s;
}

void check_inputs(std::span<const FeatureVector> X, std::span<const Label> y) {
  if (X.size() != y.size()) throw PreconditionError("feature and label counts differ");
  if (X.empty()) throw PreconditionError("cannot fit on an empty training set");
  bool pos = false, neg = false;
  const auto dim = X.front().dim;
  for (std::size_t i = 0; i < X.size(); ++i) {
    (y[i] == Label::jailbreak ? pos : neg) = true;
    if (X[i].dim != dim) throw PreconditionError("feature vectors have different dimensions");
    for (const auto& e : X[i].entries)
      if (!std::isfinite(e.value)) throw PreconditionError("non-finite feature value");
  }
  if (!pos || !neg) throw PreconditionError("training data must contain both classes");
}

double regularized_loss(std::span<const FeatureVector> X, std::span<const Label> y,
                        std::span<const double> w, double b, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = dot(w, X[i]) + b;
    loss += softplus(z) - (y[i] == Label::jailbreak ? z : 0.0);
  }
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return loss / static_cast<double>(X.size()) + 0.5 * l2 * sq;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticObjective logistic_objective(std::span<const FeatureVector> X, std::span<const Label> y,
                                     std::span<const double> weights, double bias, double l2) {
  LogisticObjective out;
  out.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = dot(weights, X[i]) + bias;
    const double target = y[i] == Label::jailbreak ? 1.0 : 0.0;
    out.loss += softplus(z) - target * z;
    const double r = (sigmoid(z) - target) * inv_n;
    for (const auto& e : X[i].entries) out.grad_weights[e.index] += r * e.value;
    out.grad_bias += r;
  }
  out.loss *= inv_n;
  double sq = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    sq += weights[j] * weights[j];
    out.grad_weights[j] += l2 * weights[j];
  }
  out.loss += 0.5 * l2 * sq;
  return out;
}

LogisticModel lr_fit(std::span<const FeatureVector> X, std::span<const Label> y,
                     const LogisticOptions& options) {
  check_inputs(X, y);
  if (!(options.l2 >= 0.0) || !std::isfinite(options.l2))
    throw PreconditionError("l2 must be a non-negative finite number");

  const auto dim = X.front().dim;
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), Label::jailbreak));
  LogisticModel model;
  model.l2 = options.l2;
  model.weights.assign(dim, 0.0);
  // w = 0 with the prior log-odds as bias already beats w = 0, b = 0.
  model.bias = std::log(positives / (static_cast<double>(y.size()) - positives));

  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  double step = 1.0;
  auto obj = logistic_objective(X, y, model.weights, model.bias, model.l2);
  std::vector<double> trial(dim);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    double gmax = std::abs(obj.grad_bias);
    double gsq = obj.grad_bias * obj.grad_bias;
    for (double g : obj.grad_weights) {
      gmax = std::max(gmax, std::abs(g));
      gsq += g * g;
    }
    if (gmax < options.tol) break;

    step *= 2.0;
    bool accepted = false;
    double trial_bias = 0.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= 0.5) {
      for (std::size_t j = 0; j < dim; ++j) trial[j] = model.weights[j] - step * obj.grad_weights[j];
      trial_bias = model.bias - step * obj.grad_bias;
      if (regularized_loss(X, y, trial, trial_bias, model.l2) <= obj.loss - kArmijo * step * gsq) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    model.weights.swap(trial);
    model.bias = trial_bias;
    obj = logistic_objective(X, y, model.weights, model.bias, model.l2);
  }
  return model;
}

double lr_predict_proba(const LogisticModel& model, const FeatureVector& v) {
  if (v.dim != model.dim())
    throw PreconditionError(
        fmt::format("vector dimension {} does not match model dimension {}", v.dim, model.dim()));
  return sigmoid(dot(model.weights, v) + model.bias);
}

}  // namespace moje
