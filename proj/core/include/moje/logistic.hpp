#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moje/corpus.hpp"
#include "moje/featurize.hpp"

namespace moje {

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;

  std::uint32_t dim() const { return static_cast<std::uint32_t>(weights.size()); }
  bool operator==(const LogisticModel&) const = default;
};

struct LogisticOptions {
  double l2 = 1.0;
  int max_iters = 500;
  double tol = 1e-5;
};

/// Mean log-loss plus (l2/2)*|w|^2 and its gradient. The bias is not
/// regularized.
struct LogisticObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

LogisticObjective logistic_objective(std::span<const FeatureVector> X, std::span<const Label> y,
                                     std::span<const double> weights, double bias, double l2);

/// Full-batch gradient descent with Armijo backtracking, starting from w=0.
/// Stops when the gradient's max-norm drops below `tol` or after
/// `max_iters` steps. Deterministic.
LogisticModel lr_fit(std::span<const FeatureVector> X, std::span<const Label> y,
                     const LogisticOptions& options);

double lr_predict_proba(const LogisticModel& model, const FeatureVector& v);

double sigmoid(double z);

}  // namespace moje
