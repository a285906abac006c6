#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "moje/error.hpp"
#include "moje/select.hpp"

using namespace moje;

namespace {

FeatureVector vec(std::uint32_t dim, std::vector<FeatureVector::Entry> entries) {
  return {dim, std::move(entries)};
}

}  // namespace

TEST(MutualInformation, PerfectFeatureIsLn2) {
  const std::uint64_t t[2][2] = {{40, 0}, {0, 40}};
  EXPECT_NEAR(mutual_information_2x2(t), std::log(2.0), 1e-12);
}

TEST(MutualInformation, IndependentFeatureIsZero) {
  const std::uint64_t t[2][2] = {{20, 20}, {20, 20}};
  EXPECT_NEAR(mutual_information_2x2(t), 0.0, 1e-15);
}

TEST(MutualInformation, MatchesEntropyOracle) {
  // counts[present][jailbreak]
  const std::uint64_t t[2][2] = {{30, 10}, {10, 30}};
  const double expected = moje::testing::oracle_mi(t);
  EXPECT_NEAR(mutual_information_2x2(t), expected, 1e-12);
  EXPECT_NEAR(mutual_information_2x2(t), 0.130812035941137, 1e-12);
}

TEST(MutualInformation, RanksFeaturesFromVectors) {
  // Feature 0 tracks the label, feature 1 is always present, feature 2 never.
  std::vector<FeatureVector> X;
  std::vector<Label> y;
  for (int i = 0; i < 10; ++i) {
    const bool jb = i % 2 == 0;
    X.push_back(jb ? vec(3, {{0, 2.0}, {1, 1.0}}) : vec(3, {{1, 3.0}}));
    y.push_back(jb ? Label::jailbreak : Label::benign);
  }
  const auto r = mutual_information(X, y);
  EXPECT_NEAR(r.scores[0], std::log(2.0), 1e-12);
  EXPECT_EQ(r.scores[1], 0.0);
  EXPECT_EQ(r.scores[2], 0.0);
  EXPECT_EQ(r.order, (std::vector<std::uint32_t>{0, 1, 2}));
  for (double s : r.scores) EXPECT_GE(s, 0.0);
}

TEST(Selection, KeepsTopFraction) {
  MIRanking r;
  r.scores = {0.1, 0.9, 0.3, 0.8, 0.0, 0.5, 0.7, 0.2, 0.6, 0.4};
  r.order = {1, 3, 6, 8, 5, 9, 2, 7, 0, 4};
  const auto mask = select_top_fraction(r, 0.5);
  EXPECT_EQ(mask.kept(), (std::vector<std::uint32_t>{1, 3, 5, 6, 8}));
  EXPECT_EQ(mask.output_dim(), 5u);
  EXPECT_EQ(select_top_fraction(r, 1.0).kept().size(), 10u);
  EXPECT_EQ(select_top_fraction(r, 0.001).kept(), (std::vector<std::uint32_t>{1}));
  EXPECT_THROW(select_top_fraction(r, 0.0), PreconditionError);
  EXPECT_THROW(select_top_fraction(r, 1.5), PreconditionError);
}

TEST(Selection, SelectedCount) {
  EXPECT_EQ(selected_count(30298, 0.15), 4545u);
  EXPECT_EQ(selected_count(10, 0.5), 5u);
  EXPECT_EQ(selected_count(10, 1e-6), 1u);
  EXPECT_EQ(selected_count(10, 1.0), 10u);
}

TEST(Selection, ApplyMask) {
  const SelectionMask mask({0, 2}, 3, 2.0 / 3.0);
  const auto out = apply_mask(mask, vec(3, {{0, 1}, {1, 5}, {2, 2}}));
  EXPECT_EQ(out, vec(2, {{0, 1}, {1, 2}}));

  const SelectionMask only5({5}, 8, 0.125);
  EXPECT_TRUE(apply_mask(only5, vec(8, {{1, 1}, {7, 3}})).empty());

  const auto id = SelectionMask::identity(3);
  const auto v = vec(3, {{1, 4}, {2, 1}});
  EXPECT_EQ(apply_mask(id, v), v);
  EXPECT_THROW(apply_mask(mask, vec(4, {})), PreconditionError);
}
