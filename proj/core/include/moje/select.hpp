#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moje/corpus.hpp"
#include "moje/featurize.hpp"

namespace moje {

/// Per-feature mutual information with the label, in nats, plus the feature
/// order by descending score (ties: ascending index).
struct MIRanking {
  std::vector<double> scores;
  std::vector<std::uint32_t> order;

  std::uint32_t dim() const { return static_cast<std::uint32_t>(scores.size()); }
};

/// Plug-in mutual information of a 2x2 contingency table. counts[a][b] is
/// the number of samples with feature state a (0 absent, 1 present) and
/// label b (0 benign, 1 jailbreak). Natural log, 0 ln 0 = 0.
double mutual_information_2x2(const std::uint64_t counts[2][2]);

/// Scores every feature on its presence/absence against the label.
/// Requires |X| = |y| >= 2, equal dimensions and both classes.
MIRanking mutual_information(std::span<const FeatureVector> X, std::span<const Label> y);

class SelectionMask {
 public:
  SelectionMask() = default;
  /// `kept` must be strictly increasing and below `dim`.
  SelectionMask(std::vector<std::uint32_t> kept, std::uint32_t dim, double fraction);

  static SelectionMask identity(std::uint32_t dim);

  const std::vector<std::uint32_t>& kept() const { return kept_; }
  std::uint32_t original_dim() const { return dim_; }
  std::uint32_t output_dim() const { return static_cast<std::uint32_t>(kept_.size()); }
  double fraction() const { return fraction_; }

  /// Position of `index` among kept features, or -1.
  std::int64_t remap(std::uint32_t index) const { return remap_[index]; }

 private:
  std::vector<std::uint32_t> kept_;
  std::uint32_t dim_ = 0;
  double fraction_ = 1.0;
  std::vector<std::int32_t> remap_;
};

/// Number of features kept for a fraction of m: max(1, round(fraction*m)).
std::uint32_t selected_count(std::uint32_t dim, double fraction);

/// Keeps the top selected_count(m, fraction) features of the ranking.
/// Throws PreconditionError unless 0 < fraction <= 1.
SelectionMask select_top_fraction(const MIRanking& ranking, double fraction);

/// Projects `v` onto the kept features, re-indexed 0..kept-1.
FeatureVector apply_mask(const SelectionMask& mask, const FeatureVector& v);

}  // namespace moje
