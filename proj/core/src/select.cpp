#include "moje/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "moje/error.hpp"

namespace moje {

double mutual_information_2x2(const std::uint64_t counts[2][2]) {
  const double n = static_cast<double>(counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]);
  if (n == 0.0) return 0.0;
  double row[2], col[2];
  for (int a = 0; a < 2; ++a) row[a] = static_cast<double>(counts[a][0] + counts[a][1]);
  for (int b = 0; b < 2; ++b) col[b] = static_cast<double>(counts[0][b] + counts[1][b]);
  double mi = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (counts[a][b] == 0) continue;
      const double joint = static_cast<double>(counts[a][b]);
      // p(a,b) ln(p(a,b) / (p(a) p(b))) with counts: (c/n) ln(c n / (r c'))
      mi += (joint / n) * std::log(joint * n / (row[a] * col[b]));
    }
  }
  return std::max(0.0, mi);
}

MIRanking mutual_information(std::span<const FeatureVector> X, std::span<const Label> y) {
  if (X.size() != y.size()) throw PreconditionError("feature and label counts differ");
  if (X.size() < 2) throw PreconditionError("mutual information needs at least 2 samples");
  const std::uint32_t dim = X.front().dim;
  std::uint64_t class_total[2] = {0, 0};
  std::vector<std::uint64_t> present[2] = {std::vector<std::uint64_t>(dim),
                                           std::vector<std::uint64_t>(dim)};
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].dim != dim) throw PreconditionError("feature vectors have different dimensions");
    const int b = y[i] == Label::jailbreak ? 1 : 0;
    ++class_total[b];
    for (const auto& e : X[i].entries) ++present[b][e.index];
  }
  if (class_total[0] == 0 || class_total[1] == 0)
    throw PreconditionError("mutual information needs both classes");

  MIRanking ranking;
  ranking.scores.resize(dim);
  for (std::uint32_t f = 0; f < dim; ++f) {
    const std::uint64_t table[2][2] = {
        {class_total[0] - present[0][f], class_total[1] - present[1][f]},
        {present[0][f], present[1][f]}};
    ranking.scores[f] = mutual_information_2x2(table);
  }
  ranking.order.resize(dim);
  std::iota(ranking.order.begin(), ranking.order.end(), 0u);
  std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return ranking.scores[a] > ranking.scores[b];
  });
  return ranking;
}

SelectionMask::SelectionMask(std::vector<std::uint32_t> kept, std::uint32_t dim, double fraction)
    : kept_(std::move(kept)), dim_(dim), fraction_(fraction), remap_(dim, -1) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw PreconditionError(fmt::format("selection fraction {} outside (0, 1]", fraction));
  if (kept_.empty()) throw PreconditionError("selection mask keeps no features");
  for (std::size_t i = 0; i < kept_.size(); ++i) {
    if (kept_[i] >= dim_) throw PreconditionError("selection mask index out of bounds");
    if (i > 0 && kept_[i - 1] >= kept_[i])
      throw PreconditionError("selection mask indices must be strictly increasing");
    remap_[kept_[i]] = static_cast<std::int32_t>(i);
  }
}

SelectionMask SelectionMask::identity(std::uint32_t dim) {
  std::vector<std::uint32_t> all(dim);
  std::iota(all.begin(), all.end(), 0u);
  return SelectionMask(std::move(all), dim, 1.0);
}

std::uint32_t selected_count(std::uint32_t dim, double fraction) {
  const auto k = static_cast<std::uint32_t>(std::lround(fraction * dim));
  return std::clamp<std::uint32_t>(k, 1, std::max<std::uint32_t>(dim, 1));
}

SelectionMask select_top_fraction(const MIRanking& ranking, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw PreconditionError(fmt::format("selection fraction {} outside (0, 1]", fraction));
  const auto k = selected_count(ranking.dim(), fraction);
  std::vector<std::uint32_t> kept(ranking.order.begin(), ranking.order.begin() + k);
  std::sort(kept.begin(), kept.end());
  return SelectionMask(std::move(kept), ranking.dim(), fraction);
}

FeatureVector apply_mask(const SelectionMask& mask, const FeatureVector& v) {
  if (v.dim != mask.original_dim())
    throw PreconditionError(fmt::format("vector dimension {} does not match mask dimension {}",
                                        v.dim, mask.original_dim()));
  FeatureVector out;
  out.dim = mask.output_dim();
  for (const auto& e : v.entries) {
    const auto pos = mask.remap(e.index);
    if (pos >= 0) out.entries.push_back({static_cast<std::uint32_t>(pos), e.value});
  }
  return out;
}

}  // namespace moje
