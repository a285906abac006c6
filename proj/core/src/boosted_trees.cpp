#include "moje/boosted_trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "moje/error.hpp"
#include "moje/logistic.hpp"

namespace moje {
namespace {

constexpr double kMinGain = 1e-12;

struct ColumnEntry {
  std::uint32_t row;
  double value;
};

// Feature-major copy of X, each column sorted by value descending then row.
struct Columns {
  std::vector<std::size_t> offsets;
  std::vector<ColumnEntry> entries;
};

Columns build_columns(std::span<const FeatureVector> X, std::uint32_t dim) {
  Columns cols;
  cols.offsets.assign(dim + 1, 0);
  for (const auto& row : X)
    for (const auto& e : row.entries) ++cols.offsets[e.index + 1];
  for (std::uint32_t f = 0; f < dim; ++f) cols.offsets[f + 1] += cols.offsets[f];
  cols.entries.resize(cols.offsets[dim]);
  auto cursor = cols.offsets;
  for (std::uint32_t r = 0; r < X.size(); ++r)
    for (const auto& e : X[r].entries) cols.entries[cursor[e.index]++] = {r, e.value};
  for (std::uint32_t f = 0; f < dim; ++f) {
    std::sort(cols.entries.begin() + cols.offsets[f], cols.entries.begin() + cols.offsets[f + 1],
              [](const ColumnEntry& a, const ColumnEntry& b) {
                return a.value != b.value ? a.value > b.value : a.row < b.row;
              });
  }
  return cols;
}

double leaf_value(double g, double h) { return -g / (h + kLeafLambda); }

double score(double g, double h) { return g * g / (h + kLeafLambda); }

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t count = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  NodeStats left;
  NodeStats right;
};

// Right-hand accumulator for one node while scanning one feature column.
struct ScanState {
  std::int64_t feature = -1;
  NodeStats right;
  double last_value = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Columns& cols, std::span<const FeatureVector> X, std::span<const double> grad,
              std::span<const double> hess, const BoostingOptions& options, std::uint32_t dim)
      : cols_(cols), X_(X), grad_(grad), hess_(hess), options_(options), dim_(dim) {}

  // Returns the tree and leaves row_node pointing at each row's leaf.
  RegressionTree build(std::vector<std::int32_t>& row_node) {
    RegressionTree tree;
    NodeStats root;
    for (std::size_t i = 0; i < X_.size(); ++i) {
      root.g += grad_[i];
      root.h += hess_[i];
      ++root.count;
    }
    row_node.assign(X_.size(), 0);
    tree.nodes.push_back({});
    stats_.assign(1, root);

    std::vector<std::int32_t> level{0};
    for (int depth = 0; depth < options_.max_depth && !level.empty(); ++depth) {
      const auto best = find_splits(tree, level, row_node);
      std::vector<std::int32_t> next;
      for (std::int32_t n : level) {
        const auto& cand = best[n];
        if (cand.feature < 0 || cand.gain <= kMinGain) continue;
        const auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        stats_.push_back(cand.left);
        stats_.push_back(cand.right);
        auto& node = tree.nodes[n];
        node.feature = cand.feature;
        node.threshold = cand.threshold;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < X_.size(); ++i) {
        const auto& node = tree.nodes[row_node[i]];
        if (node.is_leaf()) continue;
        row_node[i] = X_[i].get(node.feature) < node.threshold ? node.left : node.right;
      }
      level = std::move(next);
    }
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
      if (tree.nodes[n].is_leaf()) tree.nodes[n].value = leaf_value(stats_[n].g, stats_[n].h);
    return tree;
  }

 private:
  void consider(std::int32_t node, std::uint32_t feature, double threshold, const NodeStats& right,
                std::vector<SplitCandidate>& best) const {
    const auto& parent = stats_[node];
    if (right.count == 0 || right.count >= parent.count) return;
    const NodeStats left{parent.g - right.g, parent.h - right.h, parent.count - right.count};
    if (left.h < options_.min_child_weight || right.h < options_.min_child_weight) return;
    const double gain =
        0.5 * (score(left.g, left.h) + score(right.g, right.h) - score(parent.g, parent.h));
    auto& b = best[node];
    const bool better =
        b.feature < 0 ? gain > kMinGain
                      : (gain > b.gain || (gain == b.gain && b.feature == static_cast<std::int32_t>(feature) &&
                                           threshold < b.threshold));
    if (better) b = {gain, static_cast<std::int32_t>(feature), threshold, left, right};
  }

  std::vector<SplitCandidate> find_splits(const RegressionTree& tree, const std::vector<std::int32_t>& level,
                                          const std::vector<std::int32_t>& row_node) {
    std::vector<SplitCandidate> best(tree.nodes.size());
    std::vector<char> active(tree.nodes.size(), 0);
    for (auto n : level) active[n] = 1;
    scan_.assign(tree.nodes.size(), {});
    std::vector<std::int32_t> touched;

    for (std::uint32_t f = 0; f < dim_; ++f) {
      for (auto k = cols_.offsets[f]; k < cols_.offsets[f + 1]; ++k) {
        const auto& entry = cols_.entries[k];
        const auto n = row_node[entry.row];
        if (!active[n]) continue;
        auto& st = scan_[n];
        if (st.feature != f) {
          st = {f, {}, entry.value};
          touched.push_back(n);
        } else if (entry.value != st.last_value) {
          // Every value >= last_value is on the right of threshold last_value.
          consider(n, f, st.last_value, st.right, best);
        }
        st.right.g += grad_[entry.row];
        st.right.h += hess_[entry.row];
        ++st.right.count;
        st.last_value = entry.value;
      }
      for (auto n : touched) consider(n, f, scan_[n].last_value, scan_[n].right, best);
      touched.clear();
    }
    return best;
  }

  const Columns& cols_;
  std::span<const FeatureVector> X_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const BoostingOptions& options_;
  std::uint32_t dim_;
  std::vector<NodeStats> stats_;
  std::vector<ScanState> scan_;
};

double mean_logloss(std::span<const double> margin, std::span<const Label> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < margin.size(); ++i) {
    const double z = margin[i];
    const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    s += sp - (y[i] == Label::jailbreak ? z : 0.0);
  }
  return s / static_cast<double>(margin.size());
}

}  // namespace

double RegressionTree::evaluate(const FeatureVector& v) const {
  std::int32_t n = 0;
  while (!nodes[n].is_leaf())
    n = v.get(nodes[n].feature) < nodes[n].threshold ? nodes[n].left : nodes[n].right;
  return nodes[n].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    deepest = std::max(deepest, d[n]);
    if (!nodes[n].is_leaf()) {
      d[nodes[n].left] = d[n] + 1;
      d[nodes[n].right] = d[n] + 1;
    }
  }
  return deepest;
}

BoostedTreesModel gbt_fit(std::span<const FeatureVector> X, std::span<const Label> y,
                          const BoostingOptions& options, const BoostingObserver& observer) {
  if (X.size() != y.size()) throw PreconditionError("feature and label counts differ");
  if (X.empty()) throw PreconditionError("cannot fit on an empty training set");
  if (options.num_trees < 1) throw PreconditionError("num_trees must be >= 1");
  if (options.max_depth < 1) throw PreconditionError("max_depth must be >= 1");
  if (!(options.learning_rate > 0.0 && options.learning_rate <= 1.0))
    throw PreconditionError("learning_rate must lie in (0, 1]");
  const auto dim = X.front().dim;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].dim != dim) throw PreconditionError("feature vectors have different dimensions");
    for (const auto& e : X[i].entries)
      if (!std::isfinite(e.value)) throw PreconditionError("non-finite feature value");
    if (y[i] == Label::jailbreak) ++positives;
  }
  if (positives == 0 || positives == X.size())
    throw PreconditionError("training data must contain both classes");

  BoostedTreesModel model;
  model.dim = dim;
  model.learning_rate = options.learning_rate;
  model.max_depth = options.max_depth;
  model.base_score = std::log(static_cast<double>(positives) / static_cast<double>(X.size() - positives));

  const auto cols = build_columns(X, dim);
  std::vector<double> margin(X.size(), model.base_score);
  std::vector<double> grad(X.size()), hess(X.size());
  std::vector<std::int32_t> row_node;
  TreeBuilder builder(cols, X, grad, hess, options, dim);

  model.trees.reserve(options.num_trees);
  for (int round = 0; round < options.num_trees; ++round) {
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - (y[i] == Label::jailbreak ? 1.0 : 0.0);
      hess[i] = p * (1.0 - p);
    }
    auto tree = builder.build(row_node);
    for (std::size_t i = 0; i < X.size(); ++i)
      margin[i] += model.learning_rate * tree.nodes[row_node[i]].value;
    model.trees.push_back(std::move(tree));
    if (observer) observer(round, mean_logloss(margin, y));
  }
  return model;
}

double gbt_margin(const BoostedTreesModel& model, const FeatureVector& v) {
  if (v.dim != model.dim)
    throw PreconditionError(
        fmt::format("vector dimension {} does not match model dimension {}", v.dim, model.dim));
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.evaluate(v);
  return model.base_score + model.learning_rate * sum;
}

double gbt_predict_proba(const BoostedTreesModel& model, const FeatureVector& v) {
  return sigmoid(gbt_margin(model, v));
}

BoostedTreesModel truncate(const BoostedTreesModel& model, std::size_t num_trees) {
  BoostedTreesModel out = model;
  if (num_trees < out.trees.size()) out.trees.resize(num_trees);
  return out;
}

}  // namespace moje
