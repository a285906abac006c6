#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace moje {

enum class Label : std::uint8_t { benign = 0, jailbreak = 1 };

std::string_view to_string(Label label);
/// Case-insensitive; throws InputError on anything but jailbreak/benign.
Label parse_label(std::string_view text);

/// One prompt with its binary label. Jailbreak prompts may carry the attack
/// category they were drawn from; benign prompts never do.
struct LabeledExample {
  std::string text;
  Label label = Label::benign;
  std::optional<std::string> category;
  std::optional<std::string> source;

  bool is_jailbreak() const { return label == Label::jailbreak; }
  bool operator==(const LabeledExample&) const = default;
};

/// Throws InputError if the example breaks an invariant (blank text,
/// category on a benign example).
void validate(const LabeledExample& example);

struct Dataset {
  std::string name;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t count(Label label) const;
  /// Distinct jailbreak categories, sorted.
  std::vector<std::string> categories() const;
  bool operator==(const Dataset&) const = default;
};

Dataset concat(std::string name, const std::vector<Dataset>& parts);

Dataset load_jsonl(const std::filesystem::path& path);
/// CSV with header row `text,label,category` (category column optional).
Dataset load_csv(const std::filesystem::path& path);
/// Dispatches on extension: `.csv` goes to load_csv, anything else to
/// load_jsonl. The dataset is named after the file stem.
Dataset load_dataset(const std::filesystem::path& path);
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

struct SplitSpec {
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  bool stratify = true;

  void validate() const;
};

struct HoldoutSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Nested hold-out: `test_fraction` of the data goes to test, then
/// `val_fraction` of the remainder goes to val. With stratify=true every
/// (label, category) stratum is split separately and must hold >= 5
/// examples. Each part keeps the input order of its members.
HoldoutSplit split_holdout(const Dataset& ds, const SplitSpec& spec);

/// Per category j: every benign example plus the category-j jailbreaks,
/// in input order. Throws PreconditionError on an uncategorized jailbreak.
std::map<std::string, Dataset> partition_by_category(const Dataset& ds);

struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Label-stratified k-fold assignment over row indices 0..labels.size()-1.
/// Fold sizes differ by at most one and every row is in exactly one
/// validation fold. Index lists are ascending.
std::vector<FoldIndices> kfold_indices(const std::vector<Label>& labels,
                                       std::size_t k, std::uint64_t seed);

struct Fold {
  Dataset train;
  Dataset val;
};

std::vector<Fold> kfold(const Dataset& ds, std::size_t k, std::uint64_t seed);

std::vector<Label> labels_of(const Dataset& ds);

/// Deterministic Fisher-Yates permutation of 0..n-1. Independent of the
/// standard library's distribution implementations, so results are
/// identical across toolchains.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// splitmix64 of (seed, salt): independent child seeds for sub-steps.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace moje
