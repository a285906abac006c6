#include "moje/moje.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "moje/error.hpp"
#include "moje/parallel.hpp"

namespace moje {
namespace {

std::vector<FeatureVector> featurize_all(const FeaturePipeline& pipeline, const Dataset& ds) {
  std::vector<FeatureVector> X;
  X.reserve(ds.size());
  for (const auto& e : ds.examples)
    X.push_back(transform(pipeline.vocabulary, pipeline.tokenizer, pipeline.ngrams, e.text));
  return X;
}

void check_expert_data(const std::string& category, const Dataset& data) {
  std::size_t benign = 0, jailbreak = 0;
  for (const auto& e : data.examples) {
    if (!e.is_jailbreak()) {
      ++benign;
      continue;
    }
    ++jailbreak;
    if (!e.category)
      throw PreconditionError(
          fmt::format("expert '{}': jailbreak example without a category", category));
    if (*e.category != category)
      throw PreconditionError(fmt::format("expert '{}': foreign-category jailbreak example ('{}')",
                                          category, *e.category));
  }
  if (benign == 0 || jailbreak == 0)
    throw PreconditionError(fmt::format(
        "expert '{}': missing class ({} benign, {} jailbreak examples)", category, benign, jailbreak));
}

}  // namespace

std::uint32_t FeaturePipeline::output_dim() const {
  return mask ? mask->output_dim() : vocabulary.dim();
}

FeatureVector FeaturePipeline::transform(std::string_view text) const {
  auto v = moje::transform(vocabulary, tokenizer, ngrams, text);
  if (mask) return apply_mask(*mask, v);
  return v;
}

double Expert::predict_proba(std::string_view text) const {
  return classifier.predict_proba(pipeline.transform(text));
}

std::string_view to_string(CombineRule rule) { return rule == CombineRule::max ? "max" : "avg"; }

Combined combine(std::span<const double> probs, double tau) {
  if (probs.empty()) throw PreconditionError("cannot combine an empty probability vector");
  double max = probs[0];
  double sum = 0.0;
  for (double p : probs) {
    max = std::max(max, p);
    sum += p;
  }
  if (max >= tau) return {max, CombineRule::max};
  return {sum / static_cast<double>(probs.size()), CombineRule::avg};
}

MojeModel::MojeModel(std::vector<Expert> experts, double tau, Provenance provenance)
    : experts_(std::move(experts)), tau_(tau), provenance_(std::move(provenance)) {
  if (!(tau_ > 0.0 && tau_ < 1.0)) throw PreconditionError(fmt::format("tau {} outside (0, 1)", tau_));
  if (experts_.empty()) throw PreconditionError("a MoJE model needs at least one expert");
  std::set<std::string_view> seen;
  for (const auto& e : experts_) {
    if (!seen.insert(e.category).second)
      throw PreconditionError(fmt::format("duplicate expert category '{}'", e.category));
    if (e.pipeline.output_dim() != e.classifier.dim())
      throw PreconditionError(fmt::format("expert '{}': pipeline dimension {} != classifier dimension {}",
                                          e.category, e.pipeline.output_dim(), e.classifier.dim()));
  }
}

const Expert* MojeModel::find(std::string_view category) const {
  for (const auto& e : experts_)
    if (e.category == category) return &e;
  return nullptr;
}

Verdict infer(const MojeModel& model, std::string_view text) {
  const auto& experts = model.experts();
  std::vector<double> probs;
  probs.reserve(experts.size());
  Verdict v;
  for (const auto& e : experts) {
    probs.push_back(e.predict_proba(text));
    v.per_expert.emplace(e.category, probs.back());
  }
  const auto c = combine(probs, model.tau());
  v.score = c.score;
  v.rule = c.rule;
  v.label = c.score >= model.tau() ? Label::jailbreak : Label::benign;
  return v;
}

std::vector<Verdict> infer_batch(const MojeModel& model, std::span<const std::string> texts,
                                 std::size_t threads) {
  std::vector<Verdict> out(texts.size());
  parallel_for(texts.size(), threads, [&](std::size_t i) { out[i] = infer(model, texts[i]); });
  return out;
}

MojeModel add_expert(const MojeModel& model, Expert expert) {
  if (model.find(expert.category))
    throw PreconditionError(fmt::format("expert category '{}' already exists", expert.category));
  auto experts = model.experts();
  experts.push_back(std::move(expert));
  return MojeModel(std::move(experts), model.tau(), model.provenance());
}

ExpertTraining train_expert(const std::string& category, const Dataset& data,
                            const Tokenizer& tokenizer, const ExpertConfig& config,
                            const Dataset* selection_data) {
  check_expert_data(category, data);
  FeaturePipeline pipeline{tokenizer, config.ngrams,
                           build_vocabulary(tokenizer, config.ngrams, data), std::nullopt};
  auto X = featurize_all(pipeline, data);
  const auto y = labels_of(data);

  if (config.select_fraction) {
    if (selection_data) {
      const auto Xs = featurize_all(pipeline, *selection_data);
      const auto ys = labels_of(*selection_data);
      pipeline.mask = select_top_fraction(mutual_information(Xs, ys), *config.select_fraction);
    } else {
      pipeline.mask = select_top_fraction(mutual_information(X, y), *config.select_fraction);
    }
    for (auto& v : X) v = apply_mask(*pipeline.mask, v);
  }

  auto grid = grid_search_cv(X, y, config.grid, config.seed);
  return {Expert{category, std::move(pipeline), std::move(grid.best)}, std::move(grid.scores)};
}

ExpertTraining train_expert(const std::string& category, const Dataset& data,
                            const ExpertConfig& config, const Dataset* selection_data) {
  return train_expert(category, data, Tokenizer(config.tokenizer), config, selection_data);
}

MojeTraining train_moje(const Dataset& train, const ExpertConfig& config, SelectionScope scope,
                        double tau) {
  const auto parts = partition_by_category(train);
  if (parts.empty()) throw PreconditionError("training data has no jailbreak categories");
  const Tokenizer tokenizer(config.tokenizer);
  MojeTraining out;
  std::vector<Expert> experts;
  for (const auto& [category, data] : parts) {
    auto trained = train_expert(category, data, tokenizer, config,
                                scope == SelectionScope::global ? &train : nullptr);
    out.cv_scores.emplace(category, std::move(trained.cv_scores));
    experts.push_back(std::move(trained.expert));
  }
  out.model = MojeModel(std::move(experts), tau, Provenance{{}, config.seed, {}});
  return out;
}

}  // namespace moje
