#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moje/corpus.hpp"
#include "moje/featurize.hpp"
#include "moje/learners.hpp"
#include "moje/select.hpp"

namespace moje {

inline constexpr double kDefaultTau = 0.5;
inline constexpr std::string_view kFormatVersion = "1.0";

/// Tokenizer + n-gram config + fitted vocabulary + optional MI mask: the
/// full text -> vector map of one expert.
struct FeaturePipeline {
  Tokenizer tokenizer;
  NGramConfig ngrams;
  Vocabulary vocabulary;
  std::optional<SelectionMask> mask;

  std::uint32_t output_dim() const;
  FeatureVector transform(std::string_view text) const;
};

struct Expert {
  std::string category;
  FeaturePipeline pipeline;
  TrainedClassifier classifier;

  double cv_fbeta() const { return classifier.cv_fbeta(); }
  double predict_proba(std::string_view text) const;
};

/// Training metadata carried in a bundle next to the experts.
struct Provenance {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string created_at;
  bool operator==(const Provenance&) const = default;
};

enum class CombineRule : std::uint8_t { max, avg };

std::string_view to_string(CombineRule rule);

struct Combined {
  double score = 0.0;
  CombineRule rule = CombineRule::avg;
};

/// max(p) when max(p) >= tau, otherwise mean(p). `probs` must be non-empty.
Combined combine(std::span<const double> probs, double tau);

struct Verdict {
  double score = 0.0;
  Label label = Label::benign;
  std::map<std::string, double> per_expert;
  CombineRule rule = CombineRule::avg;
};

/// An ordered set of experts with distinct categories and a threshold tau in
/// (0, 1). Immutable once built: add_expert returns a new model.
class MojeModel {
 public:
  MojeModel() = default;
  MojeModel(std::vector<Expert> experts, double tau = kDefaultTau, Provenance provenance = {});

  const std::vector<Expert>& experts() const { return experts_; }
  double tau() const { return tau_; }
  const Provenance& provenance() const { return provenance_; }
  std::string_view format_version() const { return kFormatVersion; }

  const Expert* find(std::string_view category) const;

 private:
  std::vector<Expert> experts_;
  double tau_ = kDefaultTau;
  Provenance provenance_;
};

Verdict infer(const MojeModel& model, std::string_view text);

/// Element-wise infer; output order matches input. Work is split across
/// `threads` workers (0 = hardware concurrency); results never depend on it.
std::vector<Verdict> infer_batch(const MojeModel& model, std::span<const std::string> texts,
                                 std::size_t threads = 0);

/// Throws PreconditionError on a duplicate category.
MojeModel add_expert(const MojeModel& model, Expert expert);

enum class SelectionScope : std::uint8_t { per_expert, global };

struct ExpertConfig {
  TokenizerSpec tokenizer;
  NGramConfig ngrams;
  std::optional<double> select_fraction;
  HyperGrid grid = HyperGrid::defaults();
  std::uint64_t seed = 0;
};

struct ExpertTraining {
  Expert expert;
  std::vector<SettingScore> cv_scores;
};

/// Fits one expert on D|benign u D|jailbreak^j: vocabulary, optional MI mask,
/// then CV grid search. `selection_data`, when given, replaces `data` as the
/// corpus the MI ranking is computed on (global selection scope).
/// Throws PreconditionError when a class is missing or a jailbreak belongs
/// to another category.
ExpertTraining train_expert(const std::string& category, const Dataset& data,
                            const ExpertConfig& config,
                            const Dataset* selection_data = nullptr);

/// Same, reusing an already-resolved tokenizer (e.g. a loaded subword table).
ExpertTraining train_expert(const std::string& category, const Dataset& data,
                            const Tokenizer& tokenizer, const ExpertConfig& config,
                            const Dataset* selection_data = nullptr);

struct MojeTraining {
  MojeModel model;
  std::map<std::string, std::vector<SettingScore>> cv_scores;
};

/// partition_by_category + train_expert for every category, assembled with
/// tau.
MojeTraining train_moje(const Dataset& train, const ExpertConfig& config,
                        SelectionScope scope = SelectionScope::per_expert,
                        double tau = kDefaultTau);

}  // namespace moje
