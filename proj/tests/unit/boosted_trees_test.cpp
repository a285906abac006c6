#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "moje/boosted_trees.hpp"
#include "moje/error.hpp"
#include "moje/featurize.hpp"
#include "moje/logistic.hpp"

using namespace moje;

namespace {

double walk(const RegressionTree& tree, const FeatureVector& v) {
  std::size_t node = 0;
  while (tree.nodes[node].feature >= 0) {
    const auto& n = tree.nodes[node];
    double x = 0.0;
    for (const auto& e : v.entries)
      if (e.index == static_cast<std::uint32_t>(n.feature)) x = e.value;
    node = static_cast<std::size_t>(x < n.threshold ? n.left : n.right);
  }
  return tree.nodes[node].value;
}

struct Data {
  std::vector<FeatureVector> X;
  std::vector<Label> y;
};

Data synthetic_data(std::uint64_t seed, std::size_t n, std::uint32_t dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v{dim, {}};
    for (std::uint32_t j = 0; j < dim; ++j)
      if (u(rng) < 0.4) v.entries.push_back({j, std::floor(u(rng) * 3) + 1});
    const bool jb = (v.get(0) > 0 && v.get(1) > 0) || u(rng) < 0.1;
    d.X.push_back(std::move(v));
    d.y.push_back(jb ? Label::jailbreak : Label::benign);
  }
  return d;
}

}  // namespace

TEST(BoostedTrees, StumpLearnsPresenceFeature) {
  Data d;
  for (int i = 0; i < 20; ++i) {
    const bool jb = i % 2 == 0;
    d.X.push_back(jb ? FeatureVector{2, {{0, 1.0}, {1, 1.0}}} : FeatureVector{2, {{1, 2.0}}});
    d.y.push_back(jb ? Label::jailbreak : Label::benign);
  }
  const auto m = gbt_fit(d.X, d.y, BoostingOptions{10, 1, 0.3, 1.0});
  EXPECT_EQ(m.trees.size(), 10u);
  for (std::size_t i = 0; i < d.X.size(); ++i)
    EXPECT_EQ(gbt_predict_proba(m, d.X[i]) >= 0.5, d.y[i] == Label::jailbreak);
  for (const auto& t : m.trees) EXPECT_LE(t.depth(), 1);
}

TEST(BoostedTrees, NoSignalGivesPrior) {
  Data d;
  for (int i = 0; i < 8; ++i) {
    d.X.push_back(FeatureVector{1, {{0, 1.0}}});
    d.y.push_back(i % 2 ? Label::jailbreak : Label::benign);
  }
  const auto m = gbt_fit(d.X, d.y, BoostingOptions{1, 3, 1.0, 1.0});
  for (const auto& x : d.X) EXPECT_DOUBLE_EQ(gbt_predict_proba(m, x), 0.5);
  EXPECT_THROW(gbt_fit(d.X, d.y, BoostingOptions{0, 3, 0.3, 1.0}), PreconditionError);
}

TEST(BoostedTrees, EmptyEnsembleIsPrior) {
  const auto d = synthetic_data(1, 50, 4);
  const auto m = truncate(gbt_fit(d.X, d.y, BoostingOptions{5, 2, 0.3, 1.0}), 0);
  double pos = 0;
  for (auto l : d.y) pos += l == Label::jailbreak;
  EXPECT_NEAR(gbt_predict_proba(m, d.X[0]), pos / d.y.size(), 1e-12);
}

TEST(BoostedTrees, SingleStumpEvaluation) {
  BoostedTreesModel m;
  m.base_score = 0.2;
  m.learning_rate = 0.5;
  m.dim = 2;
  m.max_depth = 1;
  m.trees.push_back(RegressionTree{{TreeNode{1, 1.5, 1, 2, 0.0}, TreeNode{-1, 0, -1, -1, -0.8},
                                    TreeNode{-1, 0, -1, -1, 1.2}}});
  const FeatureVector left{2, {{0, 9.0}}};
  const FeatureVector right{2, {{1, 2.0}}};
  EXPECT_DOUBLE_EQ(gbt_predict_proba(m, left), sigmoid(0.2 + 0.5 * -0.8));
  EXPECT_DOUBLE_EQ(gbt_predict_proba(m, right), sigmoid(0.2 + 0.5 * 1.2));
}

TEST(BoostedTrees, MatchesBruteForceWalker) {
  const auto d = synthetic_data(2, 200, 8);
  const auto m = gbt_fit(d.X, d.y, BoostingOptions{20, 3, 0.3, 1.0});
  const auto probe = synthetic_data(3, 100, 8);
  for (const auto& x : probe.X) {
    double margin = m.base_score;
    for (const auto& t : m.trees) {
      EXPECT_EQ(t.evaluate(x), walk(t, x));
      margin += m.learning_rate * walk(t, x);
    }
    EXPECT_NEAR(gbt_margin(m, x), margin, 1e-12);
  }
}

TEST(BoostedTrees, TrainingLossNonIncreasing) {
  const auto corpus = synthetic::make_corpus(moje::testing::small_corpus_options());
  const auto parts = partition_by_category(corpus);
  const auto& ds = parts.begin()->second;
  const auto spec = TokenizerSpec::defaults(TokenizerKind::word);
  const auto vocab = build_vocabulary(spec, {}, ds);
  Data d;
  for (const auto& e : ds.examples) {
    d.X.push_back(transform(vocab, spec, {}, e.text));
    d.y.push_back(e.label);
  }
  std::vector<double> losses;
  gbt_fit(d.X, d.y, BoostingOptions{40, 3, 0.3, 1.0}, [&](int, double loss) { losses.push_back(loss); });
  ASSERT_EQ(losses.size(), 40u);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LE(losses[i], losses[i - 1] + 1e-12) << "round " << i;
}

TEST(BoostedTrees, PrefixEqualsShorterFit) {
  const auto d = synthetic_data(4, 120, 6);
  const auto full = gbt_fit(d.X, d.y, BoostingOptions{30, 3, 0.3, 1.0});
  const auto short_fit = gbt_fit(d.X, d.y, BoostingOptions{10, 3, 0.3, 1.0});
  EXPECT_EQ(truncate(full, 10), short_fit);
}

TEST(BoostedTrees, DeterministicAndDepthBounded) {
  const auto d = synthetic_data(5, 150, 6);
  const auto a = gbt_fit(d.X, d.y, BoostingOptions{15, 2, 0.3, 1.0});
  EXPECT_EQ(a, gbt_fit(d.X, d.y, BoostingOptions{15, 2, 0.3, 1.0}));
  for (const auto& t : a.trees) EXPECT_LE(t.depth(), 2);
}

TEST(BoostedTrees, RowOrderInvariance) {
  auto d = synthetic_data(6, 150, 6);
  const auto a = gbt_fit(d.X, d.y, BoostingOptions{10, 3, 0.3, 1.0});
  std::reverse(d.X.begin(), d.X.end());
  std::reverse(d.y.begin(), d.y.end());
  const auto b = gbt_fit(d.X, d.y, BoostingOptions{10, 3, 0.3, 1.0});
  for (const auto& x : d.X) EXPECT_NEAR(gbt_predict_proba(a, x), gbt_predict_proba(b, x), 1e-9);
}
