#include "commands.hpp"

#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "moje/corpus.hpp"
#include "moje/error.hpp"
#include "moje/metrics.hpp"
#include "moje/modelstore.hpp"
#include "moje/moje.hpp"
#include "moje/select.hpp"
#include "moje/service.hpp"
#include "moje/synthetic.hpp"

namespace moje::cli {
namespace {

using nlohmann::json;

struct UsageError : Error {
  using Error::Error;
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// ---- shared option groups ----------------------------------------------------

struct FeatureOptions {
  std::string tokenizer = "word";
  std::string subword_vocab;
  int lowercase = -1;  // -1: tokenizer default
  std::string ngram = "uni";
  std::string weighting = "count";
  std::optional<double> select_fraction;
  std::string select_scope = "per-expert";
  std::string grid_path;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tokenizer", tokenizer, "char, word or subword")
        ->check(CLI::IsMember({"char", "word", "subword"}));
    cmd->add_option("--subword-vocab", subword_vocab, "Subword vocabulary file (one token per line)");
    cmd->add_flag("--lowercase{1},--no-lowercase{0}", lowercase, "Override case folding");
    cmd->add_option("--ngram", ngram, "uni, bi, uni+bi (or 1, 2, 1,2)");
    cmd->add_option("--weighting", weighting, "count or tfidf")->check(CLI::IsMember({"count", "tfidf"}));
    cmd->add_option("--select-fraction", select_fraction, "Keep this fraction of features ranked by MI")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--select-scope", select_scope, "Rank features per expert or on the whole training set")
        ->check(CLI::IsMember({"per-expert", "global"}));
    cmd->add_option("--grid", grid_path, "Hyperparameter grid (JSON)");
    cmd->add_option("--seed", seed, "Seed for splits and folds");
  }

  TokenizerSpec tokenizer_spec() const {
    auto spec = TokenizerSpec::defaults(parse_tokenizer_kind(tokenizer));
    if (lowercase >= 0) spec.lowercase = lowercase == 1;
    if (!subword_vocab.empty()) spec.subword_vocab_path = subword_vocab;
    if (spec.kind == TokenizerKind::subword && !spec.subword_vocab_path)
      throw UsageError("--tokenizer subword requires --subword-vocab");
    if (spec.kind != TokenizerKind::subword && spec.subword_vocab_path)
      throw UsageError("--subword-vocab only applies to --tokenizer subword");
    return spec;
  }

  NGramConfig ngram_config() const {
    NGramConfig cfg;
    cfg.orders = parse_ngram_orders(ngram);
    cfg.weighting = weighting == "tfidf" ? Weighting::tfidf : Weighting::count;
    return cfg;
  }

  HyperGrid grid() const {
    if (grid_path.empty()) return HyperGrid::defaults();
    if (!std::filesystem::exists(grid_path))
      throw UsageError(fmt::format("grid config '{}' does not exist", grid_path));
    try {
      return HyperGrid::load(grid_path);
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
  }

  ExpertConfig expert_config() const {
    if (select_fraction && *select_fraction <= 0.0) throw UsageError("--select-fraction must be > 0");
    return {tokenizer_spec(), ngram_config(), select_fraction, grid(), seed};
  }

  SelectionScope scope() const {
    return select_scope == "global" ? SelectionScope::global : SelectionScope::per_expert;
  }
};

struct SplitOptions {
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  bool no_stratify = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--test-fraction", test_fraction, "Held-out test share")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--val-fraction", val_fraction, "Validation share of the remainder")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--no-stratify", no_stratify, "Split without (label, category) strata");
  }

  SplitSpec spec(std::uint64_t seed) const { return {test_fraction, val_fraction, seed, !no_stratify}; }
};

void require_files(const std::vector<std::string>& paths) {
  for (const auto& p : paths)
    if (!std::filesystem::is_regular_file(p)) throw UsageError(fmt::format("dataset '{}' does not exist", p));
}

Dataset load_all(const std::vector<std::string>& paths) {
  require_files(paths);
  std::vector<Dataset> parts;
  for (const auto& p : paths) parts.push_back(load_dataset(p));
  return concat(parts.size() == 1 ? parts.front().name : "combined", parts);
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::stoll(epoch));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_digest(const FeatureOptions& f, const ExpertConfig& cfg, const SplitSpec& split,
                          const std::vector<std::string>& data) {
  json j = {{"tokenizer", f.tokenizer},       {"lowercase", cfg.tokenizer.lowercase},
            {"ngram", f.ngram},               {"weighting", f.weighting},
            {"select_fraction", cfg.select_fraction ? json(*cfg.select_fraction) : json()},
            {"select_scope", f.select_scope}, {"grid", json::parse(cfg.grid.to_json())},
            {"seed", cfg.seed},               {"test_fraction", split.test_fraction},
            {"val_fraction", split.val_fraction}, {"stratify", split.stratify},
            {"data", data}};
  return sha256_hex(j.dump());
}

json verdict_json(const Verdict& v) {
  json per_expert = json::object();
  for (const auto& [category, p] : v.per_expert) per_expert[category] = p;
  return {{"label", to_string(v.label)},
          {"score", v.score},
          {"rule", to_string(v.rule)},
          {"per_expert", std::move(per_expert)}};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << text;
}

void print_expert_scores(const MojeModel& model, std::ostream& out) {
  for (const auto& e : model.experts()) {
    const auto& p = e.pipeline;
    out << fmt::format("expert {}: {} cv_fbeta={:.4f} m={} features={}\n", e.category,
                       e.classifier.describe(), e.cv_fbeta(), p.vocabulary.dim(), p.output_dim());
  }
}

// ---- train -------------------------------------------------------------------

struct TrainCommand {
  std::vector<std::string> data;
  FeatureOptions features;
  SplitOptions split;
  double tau = kDefaultTau;
  std::string out_path;
  std::string report_csv;
  std::string split_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset files (JSONL or CSV)")->required();
    features.attach(cmd);
    split.attach(cmd);
    cmd->add_option("--tau", tau, "Decision threshold")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", out_path, "Output bundle (.moje)")->required();
    cmd->add_option("--report-csv", report_csv, "Write per-setting CV scores as CSV");
    cmd->add_option("--split-dir", split_dir, "Write train/val/test splits as JSONL here");
  }

  int run(Io& io) const {
    const auto cfg = features.expert_config();
    const auto spec = split.spec(features.seed);
    const auto ds = load_all(data);
    const auto parts = split_holdout(ds, spec);
    if (!split_dir.empty()) {
      std::filesystem::create_directories(split_dir);
      save_jsonl(parts.train, std::filesystem::path(split_dir) / "train.jsonl");
      save_jsonl(parts.val, std::filesystem::path(split_dir) / "val.jsonl");
      save_jsonl(parts.test, std::filesystem::path(split_dir) / "test.jsonl");
    }
    io.err << fmt::format("split: train={} val={} test={}\n", parts.train.size(), parts.val.size(),
                          parts.test.size());

    auto trained = train_moje(parts.train, cfg, features.scope(), tau);
    MojeModel model(trained.model.experts(), tau,
                    Provenance{config_digest(features, cfg, spec, data), features.seed, utc_timestamp()});
    save(model, out_path);

    print_expert_scores(model, io.out);
    if (!report_csv.empty()) {
      std::string csv;
      bool header = true;
      for (const auto& [category, scores] : trained.cv_scores) {
        std::istringstream rows(scores_csv(scores));
        std::string line;
        bool first = true;
        while (std::getline(rows, line)) {
          if (first) {
            first = false;
            if (header) csv += "expert," + line + "\n";
            header = false;
            continue;
          }
          csv += category + "," + line + "\n";
        }
      }
      write_file(report_csv, csv);
    }
    io.out << "validation\n" << report_table(evaluate(model, parts.val));
    const auto test_report = evaluate(model, parts.test);
    io.out << "test\n" << report_table(test_report);
    io.out << report_csv_text(test_report);
    io.err << fmt::format("wrote {} ({} experts)\n", out_path, model.experts().size());
    return kOk;
  }

  static std::string report_csv_text(const MetricReport& r) { return moje::report_csv(r, "test"); }
};

// ---- eval --------------------------------------------------------------------

struct EvalCommand {
  std::string model_path;
  std::vector<std::string> data;
  bool per_dataset = false;
  double beta = 0.5;
  std::string csv_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Bundle to evaluate")->required();
    cmd->add_option("--data", data, "Labeled dataset files")->required();
    cmd->add_flag("--per-dataset", per_dataset, "Also report TPr/FPr for each (homogeneous) file");
    cmd->add_option("--beta", beta, "F-beta weight")->check(CLI::PositiveNumber);
    cmd->add_option("--csv", csv_path, "Also write the report CSV here");
  }

  int run(Io& io) const {
    require_files(data);
    const auto model = load(model_path);
    std::vector<Dataset> parts;
    for (const auto& p : data) parts.push_back(load_dataset(p));
    const auto all = concat("all", parts);
    const auto report = evaluate(model, all, beta);
    auto csv = report_csv(report, "all");
    io.out << csv << report_table(report);
    if (per_dataset) {
      std::map<std::string, Dataset> named;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto name = parts[i].name;
        if (named.count(name)) name = fmt::format("{}#{}", name, i);
        named.emplace(name, parts[i]);
      }
      const auto rates = rates_csv(per_dataset_rates(model, named));
      io.out << rates;
      csv += rates;
    }
    if (!csv_path.empty()) write_file(csv_path, csv);
    return kOk;
  }
};

// ---- sweep -------------------------------------------------------------------

struct SweepCommand {
  std::vector<std::string> data;
  std::vector<std::string> tokenizers = {"char", "word"};
  std::vector<std::string> extractors = {"uni", "tfidf-uni", "bi", "uni+bi"};
  FeatureOptions features;
  SplitOptions split;
  std::string out_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset files")->required();
    cmd->add_option("--tokenizers", tokenizers, "Tokenizers to sweep")->delimiter(',');
    cmd->add_option("--features", extractors, "Feature extractors: uni, tfidf-uni, bi, uni+bi")
        ->delimiter(',');
    features.attach(cmd);
    split.attach(cmd);
    cmd->add_option("--out", out_path, "Also write the table as CSV here");
  }

  int run(Io& io) const {
    const auto ds = load_all(data);
    const auto parts = split_holdout(ds, split.spec(features.seed));
    std::string csv = "tokenizer,features,m,auc,accuracy,f_beta,f1,recall,precision\n";
    io.out << csv;
    for (const auto& tok : tokenizers) {
      for (const auto& ext : extractors) {
        FeatureOptions f = features;
        f.tokenizer = tok;
        if (ext == "tfidf-uni") {
          f.ngram = "uni";
          f.weighting = "tfidf";
        } else {
          f.ngram = ext;
          f.weighting = "count";
        }
        const auto cfg = f.expert_config();
        const auto m = build_vocabulary(cfg.tokenizer, cfg.ngrams, parts.train).dim();
        const auto trained = train_moje(parts.train, cfg, f.scope());
        const auto r = evaluate(trained.model, parts.test);
        const auto row =
            fmt::format("{},{},{},{},{},{},{},{},{}\n", tok, ext, m, r.auc ? fmt::format("{}", *r.auc) : "",
                        r.accuracy, r.f_beta, r.f1, r.recall, r.precision);
        io.out << row << std::flush;
        csv += row;
      }
    }
    if (!out_path.empty()) write_file(out_path, csv);
    return kOk;
  }
};

// ---- select ------------------------------------------------------------------

struct SelectCommand {
  std::vector<std::string> data;
  FeatureOptions features;
  std::string category;
  double fraction = 1.0;
  std::string out_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset files")->required();
    features.attach(cmd);
    cmd->add_option("--category", category, "Rank on benign + this category only");
    cmd->add_option("--fraction", fraction, "Fraction of features to keep")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", out_path, "Write the ranking CSV here instead of stdout");
  }

  int run(Io& io) const {
    if (!(fraction > 0.0)) throw UsageError("--fraction must be > 0");
    auto ds = load_all(data);
    if (!category.empty()) {
      auto parts = partition_by_category(ds);
      auto it = parts.find(category);
      if (it == parts.end()) throw UsageError(fmt::format("no jailbreak examples of category '{}'", category));
      ds = std::move(it->second);
    }
    const Tokenizer tokenizer(features.tokenizer_spec());
    const auto cfg = features.ngram_config();
    const auto vocab = build_vocabulary(tokenizer, cfg, ds);
    std::vector<FeatureVector> X;
    for (const auto& e : ds.examples) X.push_back(transform(vocab, tokenizer, cfg, e.text));
    const auto ranking = mutual_information(X, labels_of(ds));
    const auto mask = select_top_fraction(ranking, fraction);

    std::string csv = "rank,index,term,score,kept\n";
    std::vector<char> kept(vocab.dim(), 0);
    for (auto i : mask.kept()) kept[i] = 1;
    for (std::size_t r = 0; r < ranking.order.size(); ++r) {
      const auto idx = ranking.order[r];
      json term = vocab.terms()[idx];
      csv += fmt::format("{},{},{},{},{}\n", r, idx, term.dump(), ranking.scores[idx], int(kept[idx]));
    }
    if (out_path.empty())
      io.out << csv;
    else
      write_file(out_path, csv);
    io.err << fmt::format("m={} kept={} (fraction {})\n", vocab.dim(), mask.output_dim(), fraction);
    return kOk;
  }
};

// ---- add-expert --------------------------------------------------------------

struct AddExpertCommand {
  std::string model_path;
  std::string category;
  std::vector<std::string> data;
  FeatureOptions features;
  std::string out_path;
  bool features_given = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Existing bundle (left untouched)")->required();
    cmd->add_option("--category", category, "New expert's category id")->required();
    cmd->add_option("--data", data, "Benign + new-category training data")->required();
    features.attach(cmd);
    cmd->add_option("--out", out_path, "New bundle path")->required();
  }

  int run(Io& io, const CLI::App& cmd) const {
    if (std::filesystem::exists(out_path) && std::filesystem::exists(model_path) &&
        std::filesystem::equivalent(out_path, model_path))
      throw UsageError("--out must differ from --model; the original bundle is never modified");
    const auto ds = load_all(data);
    const auto model = load(model_path);
    if (model.find(category)) throw UsageError(fmt::format("category '{}' already exists in the bundle", category));

    auto cfg = features.expert_config();
    // Without explicit featurization flags, mirror the existing experts.
    const auto& ref = model.experts().front().pipeline;
    std::optional<Tokenizer> tokenizer;
    if (cmd.count("--tokenizer") == 0) {
      tokenizer = ref.tokenizer;
      cfg.tokenizer = ref.tokenizer.spec();
    }
    if (cmd.count("--ngram") == 0 && cmd.count("--weighting") == 0) cfg.ngrams = ref.ngrams;
    if (!tokenizer) tokenizer.emplace(cfg.tokenizer);

    Dataset train{category, {}};
    std::size_t skipped = 0;
    for (auto e : ds.examples) {
      if (e.is_jailbreak()) {
        if (!e.category) e.category = category;
        if (*e.category != category) {
          ++skipped;
          continue;
        }
      }
      train.examples.push_back(std::move(e));
    }
    if (skipped) io.err << fmt::format("skipped {} jailbreak examples of other categories\n", skipped);

    auto trained = train_expert(category, train, *tokenizer, cfg);
    const auto extended = add_expert(model, std::move(trained.expert));
    save(extended, out_path);
    print_expert_scores(extended, io.out);
    io.err << fmt::format("wrote {} ({} experts)\n", out_path, extended.experts().size());
    return kOk;
  }
};

// ---- predict -----------------------------------------------------------------

struct PredictCommand {
  std::string model_path;
  std::vector<std::string> texts;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Bundle")->required();
    cmd->add_option("--text", texts, "Prompt(s); stdin lines are read when omitted");
  }

  int run(Io& io) const {
    const auto model = load(model_path);
    auto emit = [&](const std::string& text) { io.out << verdict_json(infer(model, text)).dump() << '\n'; };
    if (!texts.empty()) {
      for (const auto& t : texts) emit(t);
      return kOk;
    }
    std::string line;
    while (std::getline(io.in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      emit(line);
    }
    return kOk;
  }
};

// ---- serve -------------------------------------------------------------------

struct ServeCommand {
  std::string model_path;
  std::string bind = "127.0.0.1:8080";
  std::size_t workers = 4;
  std::size_t max_prompt_bytes = 32768;
  bool quiet = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Bundle to serve")->required();
    cmd->add_option("--bind", bind, "host:port");
    cmd->add_option("--workers", workers, "Request worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--max-prompt-bytes", max_prompt_bytes, "Reject longer prompts with 413");
    cmd->add_flag("--quiet", quiet, "No per-request log lines");
  }

  int run(Io& io) const {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects host:port");
    ServerOptions server_options;
    server_options.host = bind.substr(0, colon);
    try {
      server_options.port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError(fmt::format("invalid port in --bind '{}'", bind));
    }
    server_options.workers = workers;

    ServiceOptions service_options;
    service_options.max_prompt_bytes = max_prompt_bytes;
    std::mutex log_mutex;
    if (!quiet)
      service_options.log = [&](std::string_view line) {
        std::lock_guard lock(log_mutex);
        io.err << line << '\n' << std::flush;
      };

    // Block the termination signals before any thread starts so that only
    // the waiter below receives them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ModerationService service(ModerationService::make_snapshot(load(model_path)), service_options);
    HttpServer server(service, server_options);
    const int port = server.bind();
    io.err << fmt::format("serving model {} on {}:{}\n", service.snapshot()->version, server_options.host, port)
           << std::flush;

    std::jthread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    server.run();
    // run() returned on its own (listen failure): release the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    return kOk;
  }
};

// ---- synth -------------------------------------------------------------------

struct SynthCommand {
  std::string out_dir;
  synthetic::CorpusOptions options;
  std::size_t ood = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out-dir", out_dir, "Directory for the JSONL files")->required();
    cmd->add_option("--seed", options.seed, "Generator seed");
    cmd->add_option("--benign", options.benign, "Benign prompts");
    cmd->add_option("--per-category", options.per_category, "Prompts per attack family");
    cmd->add_option("--contamination", options.benign_contamination,
                    "Share of benign prompts carrying one stray signature")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--ood", ood, "Also write this many prompts of the held-out family");
  }

  int run(Io& io) const {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    save_jsonl(synthetic::benign_prompts(options), dir / "benign.jsonl");
    std::uint64_t salt = 1;
    for (const auto& profile : synthetic::builtin_categories()) {
      const auto ds =
          synthetic::category_prompts(profile, options.per_category, options.seed * 7919 + salt++, options);
      save_jsonl(ds, dir / (profile.name + ".jsonl"));
    }
    if (ood > 0) {
      const auto& profile = synthetic::ood_category();
      save_jsonl(synthetic::category_prompts(profile, ood, options.seed * 104729 + 17, options),
                 dir / (profile.name + ".jsonl"));
    }
    io.err << fmt::format("wrote synthetic corpus to {}\n", dir.string());
    return kOk;
  }
};

}  // namespace

int run(std::span<const std::string> args, std::istream& in, std::ostream& out, std::ostream& err) {
  Io io{in, out, err};
  CLI::App app{"moje: mixture-of-experts jailbreak guardrail"};
  app.name("moje");
  app.require_subcommand(1);
  // Sections name subcommands, e.g. [train] or [sweep]; flags win over the file.
  app.set_config("--config", "", "TOML/INI config file with [train]/[sweep]/... sections");
  app.fallthrough();

  TrainCommand train;
  EvalCommand eval;
  SweepCommand sweep;
  SelectCommand select;
  AddExpertCommand add;
  PredictCommand predict;
  ServeCommand serve;
  SynthCommand synth;
  auto* train_cmd = app.add_subcommand("train", "Train one expert per jailbreak category and save a bundle");
  auto* eval_cmd = app.add_subcommand("eval", "Report AUC/ACC/F_beta/recall/precision for a bundle");
  auto* sweep_cmd = app.add_subcommand("sweep", "Tokenizer x n-gram ablation table");
  auto* select_cmd = app.add_subcommand("select", "Rank features by mutual information");
  auto* add_cmd = app.add_subcommand("add-expert", "Train a new expert and write an extended bundle");
  auto* predict_cmd = app.add_subcommand("predict", "Classify prompts (JSON lines out)");
  auto* serve_cmd = app.add_subcommand("serve", "HTTP moderation endpoint");
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic labeled corpus");
  train.attach(train_cmd);
  eval.attach(eval_cmd);
  sweep.attach(sweep_cmd);
  select.attach(select_cmd);
  add.attach(add_cmd);
  predict.attach(predict_cmd);
  serve.attach(serve_cmd);
  synth.attach(synth_cmd);

  std::vector<const char*> argv{"moje"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*train_cmd) return train.run(io);
    if (*eval_cmd) return eval.run(io);
    if (*sweep_cmd) return sweep.run(io);
    if (*select_cmd) return select.run(io);
    if (*add_cmd) return add.run(io, *add_cmd);
    if (*predict_cmd) return predict.run(io);
    if (*serve_cmd) return serve.run(io);
    if (*synth_cmd) return synth.run(io);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace moje::cli
