#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moje/corpus.hpp"

namespace moje::synthetic {

/// Built-in attack families. Each has its own pool of signature n-grams
/// drawn into its prompts on top of shared filler vocabulary.
struct CategoryProfile {
  std::string name;
  std::vector<std::string> signatures;
  /// Appended verbatim to every prompt of the family (e.g. "! ! ! !").
  std::string suffix;
};

/// Four in-distribution families plus one held-out family ("persuasion")
/// whose signatures overlap none of the others.
const std::vector<CategoryProfile>& builtin_categories();
const CategoryProfile& ood_category();

struct CorpusOptions {
  std::size_t benign = 4000;
  std::size_t per_category = 400;
  std::uint64_t seed = 1;
  /// Probability that a benign prompt contains one stray signature token.
  double benign_contamination = 0.03;
  int min_signatures = 2;
  int max_signatures = 4;
};

Dataset benign_prompts(const CorpusOptions& options);
Dataset category_prompts(const CategoryProfile& profile, std::size_t count, std::uint64_t seed,
                         const CorpusOptions& options);

/// Benign prompts followed by every built-in in-distribution category.
Dataset make_corpus(const CorpusOptions& options);

/// A single prompt of roughly `tokens` word tokens, benign-styled.
std::string long_prompt(std::size_t tokens, std::uint64_t seed);

}  // namespace moje::synthetic
