#include "moje/modelstore.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json.hpp"

namespace moje {
namespace {

using nlohmann::json;
using Kind = BundleError::Kind;

constexpr std::string_view kFormatName = "moje-bundle";

[[noreturn]] void fail(Kind kind, const std::string& what) { throw BundleError(kind, what); }

void require_finite(double v, std::string_view what) {
  if (!std::isfinite(v)) fail(Kind::invariant_violation, fmt::format("{} is not finite", what));
}

// ---- encoding --------------------------------------------------------------

json encode_tokenizer(const Tokenizer& tok) {
  const auto& spec = tok.spec();
  json j = {{"kind", to_string(spec.kind)}, {"lowercase", spec.lowercase}};
  j["subword_vocab_path"] = spec.subword_vocab_path ? json(spec.subword_vocab_path->string()) : json();
  if (tok.subwords()) j["subword_tokens"] = tok.subwords()->tokens();
  return j;
}

json encode_classifier(const TrainedClassifier& c) {
  json j = {{"family", to_string(c.family())}, {"cv_fbeta", c.cv_fbeta()}};
  if (auto* lr = std::get_if<LogisticModel>(&c.model())) {
    j["l2"] = lr->l2;
    j["bias"] = lr->bias;
    j["weights"] = lr->weights;
    return j;
  }
  const auto& gbt = std::get<BoostedTreesModel>(c.model());
  j["dim"] = gbt.dim;
  j["learning_rate"] = gbt.learning_rate;
  j["base_score"] = gbt.base_score;
  j["max_depth"] = gbt.max_depth;
  json trees = json::array();
  for (const auto& tree : gbt.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(),
         right = json::array(), value = json::array();
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"value", value}});
  }
  j["trees"] = std::move(trees);
  return j;
}

json encode_expert(const Expert& e) {
  const auto& p = e.pipeline;
  json vocab = {{"terms", p.vocabulary.terms()}};
  if (p.vocabulary.idf()) vocab["idf"] = *p.vocabulary.idf();
  json mask;
  if (p.mask)
    mask = {{"kept", p.mask->kept()}, {"dim", p.mask->original_dim()}, {"fraction", p.mask->fraction()}};
  return {{"category", e.category},
          {"tokenizer", encode_tokenizer(p.tokenizer)},
          {"ngrams", {{"orders", p.ngrams.orders}, {"weighting", to_string(p.ngrams.weighting)}}},
          {"vocabulary", std::move(vocab)},
          {"mask", std::move(mask)},
          {"classifier", encode_classifier(e.classifier)}};
}

json encode_model(const MojeModel& model) {
  json experts = json::array();
  for (const auto& e : model.experts()) experts.push_back(encode_expert(e));
  return {{"tau", model.tau()}, {"experts", std::move(experts)}};
}

// ---- decoding --------------------------------------------------------------

Tokenizer decode_tokenizer(const json& j) {
  TokenizerSpec spec;
  spec.kind = parse_tokenizer_kind(j.at("kind").get<std::string>());
  spec.lowercase = j.at("lowercase").get<bool>();
  if (!j.at("subword_vocab_path").is_null())
    spec.subword_vocab_path = j.at("subword_vocab_path").get<std::string>();
  std::shared_ptr<const SubwordVocab> subwords;
  if (spec.kind == TokenizerKind::subword) {
    if (!j.contains("subword_tokens"))
      fail(Kind::invariant_violation, "subword tokenizer without embedded vocabulary");
    subwords = std::make_shared<const SubwordVocab>(j.at("subword_tokens").get<std::vector<std::string>>());
  }
  return Tokenizer(std::move(spec), std::move(subwords));
}

NGramConfig decode_ngrams(const json& j) {
  NGramConfig cfg;
  cfg.orders = j.at("orders").get<std::set<int>>();
  const auto w = j.at("weighting").get<std::string>();
  if (w == "count")
    cfg.weighting = Weighting::count;
  else if (w == "tfidf")
    cfg.weighting = Weighting::tfidf;
  else
    fail(Kind::invariant_violation, fmt::format("unknown weighting '{}'", w));
  cfg.validate();
  return cfg;
}

void validate_tree(const RegressionTree& tree, std::uint32_t dim, int max_depth) {
  const auto size = static_cast<std::int32_t>(tree.nodes.size());
  if (size == 0) fail(Kind::invariant_violation, "empty tree");
  std::vector<int> parents(tree.nodes.size(), 0);
  for (std::int32_t n = 0; n < size; ++n) {
    const auto& node = tree.nodes[n];
    require_finite(node.value, "leaf value");
    if (node.is_leaf()) {
      if (node.feature != -1 || node.left != -1 || node.right != -1)
        fail(Kind::invariant_violation, "malformed leaf node");
      continue;
    }
    require_finite(node.threshold, "split threshold");
    if (static_cast<std::uint32_t>(node.feature) >= dim)
      fail(Kind::invariant_violation, "tree feature index out of bounds");
    for (auto child : {node.left, node.right}) {
      if (child <= n || child >= size) fail(Kind::invariant_violation, "tree child index invalid");
      ++parents[child];
    }
  }
  for (std::size_t n = 1; n < parents.size(); ++n)
    if (parents[n] != 1) fail(Kind::invariant_violation, "tree node without exactly one parent");
  if (tree.depth() > max_depth) fail(Kind::invariant_violation, "tree deeper than max_depth");
}

TrainedClassifier decode_classifier(const json& j) {
  const auto family = j.at("family").get<std::string>();
  const double cv = j.at("cv_fbeta").get<double>();
  if (!(cv >= 0.0 && cv <= 1.0)) fail(Kind::invariant_violation, "cv_fbeta outside [0, 1]");
  if (family == "logistic") {
    LogisticModel lr;
    lr.l2 = j.at("l2").get<double>();
    lr.bias = j.at("bias").get<double>();
    lr.weights = j.at("weights").get<std::vector<double>>();
    require_finite(lr.bias, "bias");
    if (!(lr.l2 >= 0.0)) fail(Kind::invariant_violation, "negative l2");
    for (double w : lr.weights) require_finite(w, "weight");
    return TrainedClassifier(std::move(lr), cv);
  }
  if (family != "boosted_trees") fail(Kind::invariant_violation, fmt::format("unknown family '{}'", family));
  BoostedTreesModel gbt;
  gbt.dim = j.at("dim").get<std::uint32_t>();
  gbt.learning_rate = j.at("learning_rate").get<double>();
  gbt.base_score = j.at("base_score").get<double>();
  gbt.max_depth = j.at("max_depth").get<int>();
  require_finite(gbt.base_score, "base_score");
  if (!(gbt.learning_rate > 0.0 && gbt.learning_rate <= 1.0))
    fail(Kind::invariant_violation, "learning_rate outside (0, 1]");
  if (gbt.max_depth < 1) fail(Kind::invariant_violation, "max_depth < 1");
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::int32_t>>();
    const auto right = t.at("right").get<std::vector<std::int32_t>>();
    const auto value = t.at("value").get<std::vector<double>>();
    const auto n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
      fail(Kind::corrupt, "tree arrays have different lengths");
    RegressionTree tree;
    for (std::size_t i = 0; i < n; ++i) tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
    validate_tree(tree, gbt.dim, gbt.max_depth);
    gbt.trees.push_back(std::move(tree));
  }
  return TrainedClassifier(std::move(gbt), cv);
}

Expert decode_expert(const json& j) {
  Expert e;
  e.category = j.at("category").get<std::string>();
  if (e.category.empty()) fail(Kind::invariant_violation, "empty expert category");
  auto tokenizer = decode_tokenizer(j.at("tokenizer"));
  auto ngrams = decode_ngrams(j.at("ngrams"));
  const auto& v = j.at("vocabulary");
  std::optional<std::vector<double>> idf;
  if (v.contains("idf")) idf = v.at("idf").get<std::vector<double>>();
  Vocabulary vocab(tokenizer.spec(), ngrams, v.at("terms").get<std::vector<std::string>>(), std::move(idf));
  std::optional<SelectionMask> mask;
  if (const auto& m = j.at("mask"); !m.is_null()) {
    mask.emplace(m.at("kept").get<std::vector<std::uint32_t>>(), m.at("dim").get<std::uint32_t>(),
                 m.at("fraction").get<double>());
    if (mask->original_dim() != vocab.dim())
      fail(Kind::invariant_violation, "mask dimension differs from vocabulary size");
  }
  e.pipeline = FeaturePipeline{std::move(tokenizer), std::move(ngrams), std::move(vocab), std::move(mask)};
  e.classifier = decode_classifier(j.at("classifier"));
  return e;
}

MojeModel decode_model(const json& model, Provenance provenance) {
  const double tau = model.at("tau").get<double>();
  if (!(tau > 0.0 && tau < 1.0)) fail(Kind::invariant_violation, fmt::format("tau {} outside (0, 1)", tau));
  std::vector<Expert> experts;
  for (const auto& e : model.at("experts")) experts.push_back(decode_expert(e));
  return MojeModel(std::move(experts), tau, std::move(provenance));
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string model_id(const MojeModel& model) {
  return sha256_hex(encode_model(model).dump()).substr(0, 16);
}

std::string serialize(const MojeModel& model) {
  json body = encode_model(model);
  const auto digest = sha256_hex(body.dump());
  const auto& prov = model.provenance();
  json bundle = {{"format", kFormatName},
                 {"format_version", kFormatVersion},
                 {"model", std::move(body)},
                 {"provenance",
                  {{"config_digest", prov.config_digest}, {"seed", prov.seed}, {"created_at", prov.created_at}}},
                 {"digest", {{"algorithm", "sha256"}, {"model", digest}}}};
  return bundle.dump(1) + "\n";
}

MojeModel deserialize(std::string_view text) {
  json bundle;
  try {
    bundle = json::parse(text);
  } catch (const json::exception& e) {
    fail(Kind::corrupt, fmt::format("corrupt bundle: {}", e.what()));
  }
  try {
    if (!bundle.is_object() || bundle.value("format", "") != kFormatName)
      fail(Kind::corrupt, "corrupt bundle: not a moje bundle");
    const auto version = bundle.at("format_version").get<std::string>();
    if (version != kFormatVersion)
      fail(Kind::version_mismatch,
           fmt::format("unsupported bundle version '{}' (this build reads {})", version, kFormatVersion));
    const auto& p = bundle.at("provenance");
    Provenance prov{p.at("config_digest").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                    p.at("created_at").get<std::string>()};
    const auto& model_json = bundle.at("model");
    MojeModel model;
    try {
      model = decode_model(model_json, std::move(prov));
    } catch (const PreconditionError& e) {
      fail(Kind::invariant_violation, fmt::format("invalid bundle: {}", e.what()));
    } catch (const InputError& e) {
      fail(Kind::invariant_violation, fmt::format("invalid bundle: {}", e.what()));
    }
    const auto& digest = bundle.at("digest");
    if (digest.at("algorithm").get<std::string>() != "sha256" ||
        digest.at("model").get<std::string>() != sha256_hex(model_json.dump()))
      fail(Kind::corrupt, "corrupt bundle: model digest mismatch");
    return model;
  } catch (const json::exception& e) {
    fail(Kind::corrupt, fmt::format("corrupt bundle: {}", e.what()));
  }
}

void save(const MojeModel& model, const std::filesystem::path& path) {
  const auto text = serialize(model);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Kind::io, fmt::format("cannot write bundle '{}'", path.string()));
    out << text;
    out.close();
    if (!out) fail(Kind::io, fmt::format("write failed for bundle '{}'", path.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Kind::io, fmt::format("cannot move bundle into place at '{}'", path.string()));
  }
}

MojeModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Kind::io, fmt::format("cannot open bundle '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const BundleError& e) {
    fail(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace moje
