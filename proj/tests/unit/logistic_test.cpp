#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "moje/error.hpp"
#include "moje/logistic.hpp"

using namespace moje;

namespace {

struct Problem {
  std::vector<FeatureVector> X;
  std::vector<Label> y;
};

Problem random_problem(std::mt19937_64& rng, std::uint32_t dim, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v{dim, {}};
    for (std::uint32_t j = 0; j < dim; ++j)
      if (u(rng) < 0.5) v.entries.push_back({j, std::floor(u(rng) * 4.0) + 1.0});
    p.X.push_back(std::move(v));
    p.y.push_back(u(rng) < 0.5 ? Label::jailbreak : Label::benign);
  }
  p.y[0] = Label::jailbreak;
  p.y[1] = Label::benign;
  return p;
}

}  // namespace

TEST(Logistic, SigmoidIdentities) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Logistic, ZeroModelIsHalf) {
  LogisticModel m{{0.0, 0.0}, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(lr_predict_proba(m, FeatureVector{2, {{0, 3.0}}}), 0.5);
  LogisticModel k{{std::log(3.0), 0.0}, 0.0, 1.0};
  EXPECT_NEAR(lr_predict_proba(k, FeatureVector{2, {{0, 1.0}}}), 0.75, 1e-15);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, 6, 15);
    std::vector<double> w(6);
    for (auto& x : w) x = g(rng);
    const double b = g(rng), l2 = 0.3;
    const auto obj = logistic_objective(p.X, p.y, w, b, l2);
    const double h = 1e-6;
    for (std::size_t j = 0; j <= w.size(); ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < w.size()) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (logistic_objective(p.X, p.y, wp, bp, l2).loss - logistic_objective(p.X, p.y, wm, bm, l2).loss) / (2 * h);
      const double an = j < w.size() ? obj.grad_weights[j] : obj.grad_bias;
      EXPECT_LT(std::abs(an - fd) / std::max(1e-8, std::abs(an) + std::abs(fd)), 1e-5) << "coord " << j;
    }
  }
}

TEST(Logistic, SeparableToy) {
  std::vector<FeatureVector> X = {FeatureVector{1, {{0, 1.0}}}, FeatureVector{1, {}}};
  std::vector<Label> y = {Label::jailbreak, Label::benign};
  const auto m = lr_fit(X, y, LogisticOptions{1.0, 500, 1e-8});
  EXPECT_GT(lr_predict_proba(m, X[0]), 0.5);
  EXPECT_LT(lr_predict_proba(m, X[1]), 0.5);
  const auto obj = logistic_objective(X, y, m.weights, m.bias, 1.0);
  EXPECT_LT(std::abs(obj.grad_weights[0]), 1e-7);
}

TEST(Logistic, HeavyRegularizationGivesPrior) {
  std::mt19937_64 rng(9);
  const auto p = random_problem(rng, 5, 40);
  const auto m = lr_fit(p.X, p.y, LogisticOptions{1e6, 500, 1e-10});
  double pos = 0;
  for (auto l : p.y) pos += l == Label::jailbreak;
  const double prior = pos / p.y.size();
  for (double w : m.weights) EXPECT_LT(std::abs(w), 1e-4);
  for (const auto& x : p.X) EXPECT_NEAR(lr_predict_proba(m, x), prior, 1e-3);
}

TEST(Logistic, MonotoneInPositiveWeightFeature) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    LogisticModel m{{g(rng), g(rng), g(rng)}, g(rng), 1.0};
    const std::uint32_t j = trial % 3;
    FeatureVector lo{3, {}}, hi{3, {}};
    for (std::uint32_t k = 0; k < 3; ++k) {
      const double c = std::floor(std::abs(g(rng)) * 3);
      const double bump = (k == j && m.weights[j] > 0) ? 1.0 : 0.0;
      if (c > 0) lo.entries.push_back({k, c});
      if (c + bump > 0) hi.entries.push_back({k, c + bump});
    }
    EXPECT_GE(lr_predict_proba(m, hi), lr_predict_proba(m, lo));
  }
}

TEST(Logistic, DeterministicAndValidated) {
  std::mt19937_64 rng(1);
  const auto p = random_problem(rng, 4, 30);
  EXPECT_EQ(lr_fit(p.X, p.y, {}), lr_fit(p.X, p.y, {}));
  std::vector<Label> one_class(p.y.size(), Label::benign);
  EXPECT_THROW(lr_fit(p.X, one_class, {}), PreconditionError);
  EXPECT_THROW(lr_fit(p.X, p.y, LogisticOptions{-1.0, 10, 1e-5}), PreconditionError);
}
