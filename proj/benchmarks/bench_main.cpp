#include <benchmark/benchmark.h>

#include "moje/boosted_trees.hpp"
#include "moje/featurize.hpp"
#include "moje/moje.hpp"
#include "moje/synthetic.hpp"

namespace {

using namespace moje;

const Dataset& corpus() {
  static const Dataset ds = [] {
    synthetic::CorpusOptions o;
    o.benign = 1000;
    o.per_category = 100;
    return synthetic::make_corpus(o);
  }();
  return ds;
}

const MojeModel& model() {
  static const MojeModel m = [] {
    ExpertConfig cfg;
    cfg.grid.lr_l2 = {1.0};
    cfg.grid.gbt = {{50, 3, 0.3}};
    cfg.grid.cv_folds = 3;
    return train_moje(corpus(), cfg).model;
  }();
  return m;
}

void BM_Tokenize(benchmark::State& state) {
  const auto spec = TokenizerSpec::defaults(static_cast<TokenizerKind>(state.range(0)));
  const auto text = synthetic::long_prompt(500, 1);
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(spec, text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(static_cast<int>(TokenizerKind::character))->Arg(static_cast<int>(TokenizerKind::word));

void BM_Transform(benchmark::State& state) {
  const auto spec = TokenizerSpec::defaults(TokenizerKind::word);
  const NGramConfig cfg{{1, 2}, state.range(0) ? Weighting::tfidf : Weighting::count};
  const Tokenizer tok(spec);
  const auto vocab = build_vocabulary(tok, cfg, corpus());
  const auto text = synthetic::long_prompt(500, 2);
  for (auto _ : state) benchmark::DoNotOptimize(transform(vocab, tok, cfg, text));
}
BENCHMARK(BM_Transform)->Arg(0)->Arg(1);

void BM_InferPromptLength(benchmark::State& state) {
  const auto& m = model();
  const auto text = synthetic::long_prompt(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(infer(m, text));
}
BENCHMARK(BM_InferPromptLength)->Arg(20)->Arg(100)->Arg(500)->Arg(2000);

void BM_InferBatch(benchmark::State& state) {
  const auto& m = model();
  std::vector<std::string> texts;
  for (const auto& e : corpus().examples) texts.push_back(e.text);
  for (auto _ : state) benchmark::DoNotOptimize(infer_batch(m, texts, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * texts.size()));
}
BENCHMARK(BM_InferBatch)->Arg(1)->Arg(0);

void BM_TrainExpert(benchmark::State& state) {
  const auto parts = partition_by_category(corpus());
  const auto& ds = parts.begin()->second;
  ExpertConfig cfg;
  cfg.grid.lr_l2 = {1.0};
  cfg.grid.gbt = {{50, 3, 0.3}};
  cfg.grid.cv_folds = 3;
  for (auto _ : state) benchmark::DoNotOptimize(train_expert(parts.begin()->first, ds, cfg));
}
BENCHMARK(BM_TrainExpert)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
