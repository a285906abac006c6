#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "moje/corpus.hpp"
#include "moje/featurize.hpp"

namespace moje {

/// Internal nodes route `x[feature] < threshold` to `left`. Leaves have
/// feature == -1 and carry `value`. Absent sparse coordinates read as 0.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(const FeatureVector& v) const;
  int depth() const;
  bool operator==(const RegressionTree&) const = default;
};

struct BoostedTreesModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.3;
  double base_score = 0.0;
  std::uint32_t dim = 0;
  int max_depth = 3;

  bool operator==(const BoostedTreesModel&) const = default;
};

struct BoostingOptions {
  int num_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.3;
  double min_child_weight = 1.0;
};

/// L2 penalty on leaf values.
inline constexpr double kLeafLambda = 1.0;

/// Called after each round with the round index and training log-loss.
using BoostingObserver = std::function<void(int round, double train_logloss)>;

/// Second-order gradient boosting on logistic loss with exact greedy splits.
/// Deterministic: gain ties go to the lowest feature, then lowest threshold.
BoostedTreesModel gbt_fit(std::span<const FeatureVector> X, std::span<const Label> y,
                          const BoostingOptions& options, const BoostingObserver& observer = {});

double gbt_margin(const BoostedTreesModel& model, const FeatureVector& v);
double gbt_predict_proba(const BoostedTreesModel& model, const FeatureVector& v);

/// The model restricted to its first `num_trees` trees. Boosting is
/// deterministic, so this equals a fit with num_trees rounds.
BoostedTreesModel truncate(const BoostedTreesModel& model, std::size_t num_trees);

}  // namespace moje
