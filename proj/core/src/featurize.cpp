#include "moje/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>

#include "moje/error.hpp"
#include "moje/unicode.hpp"

namespace moje {
namespace {

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

void flush(std::string& current, std::vector<std::string>& out) {
  if (!current.empty()) {
    out.push_back(std::move(current));
    current.clear();
  }
}

void greedy_segment(const SubwordVocab& vocab, std::string_view word,
                    std::vector<std::string>& out) {
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t end = std::min(word.size(), pos + vocab.max_token_bytes());
    bool matched = false;
    for (; end > pos; --end) {
      if (end < word.size() && is_continuation(word[end])) continue;
      if (vocab.contains(word.substr(pos, end - pos))) {
        out.emplace_back(word.substr(pos, end - pos));
        pos = end;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.emplace_back(SubwordVocab::kUnknown);
      ++pos;
      while (pos < word.size() && is_continuation(word[pos])) ++pos;
    }
  }
}

// Calls fn(key) for every n-gram of every configured order.
template <typename Fn>
void for_each_ngram(TokenizerKind kind, const std::vector<std::string>& tokens,
                    const std::set<int>& orders, std::string& buffer, Fn&& fn) {
  for (int n : orders) {
    const auto order = static_cast<std::size_t>(n);
    if (tokens.size() < order) continue;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      if (order == 1) {
        fn(std::string_view(tokens[i]));
      } else {
        ngram_key(kind, tokens, i, order, buffer);
        fn(std::string_view(buffer));
      }
    }
  }
}

}  // namespace

std::string_view to_string(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::character: return "char";
    case TokenizerKind::word: return "word";
    case TokenizerKind::subword: return "subword";
  }
  return "?";
}

TokenizerKind parse_tokenizer_kind(std::string_view text) {
  if (text == "char" || text == "character") return TokenizerKind::character;
  if (text == "word") return TokenizerKind::word;
  if (text == "subword") return TokenizerKind::subword;
  throw InputError(fmt::format("unknown tokenizer '{}' (expected char, word or subword)", text));
}

TokenizerSpec TokenizerSpec::defaults(TokenizerKind kind) {
  return {kind, kind != TokenizerKind::subword, std::nullopt};
}

void TokenizerSpec::validate() const {
  if (kind == TokenizerKind::subword && !subword_vocab_path)
    throw PreconditionError("subword tokenizer requires a vocabulary file");
  if (kind != TokenizerKind::subword && subword_vocab_path)
    throw PreconditionError("only the subword tokenizer takes a vocabulary file");
}

SubwordVocab::SubwordVocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::uint32_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) continue;
    index_.try_emplace(tokens_[i], i);
    max_bytes_ = std::max(max_bytes_, tokens_[i].size());
  }
  if (index_.empty()) throw InputError("subword vocabulary has no tokens");
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open subword vocabulary '{}'", path.string()));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    unicode::decode(line);  // validates
    tokens.push_back(std::move(line));
  }
  return SubwordVocab(std::move(tokens));
}

bool SubwordVocab::contains(std::string_view piece) const { return index_.find(piece) != index_.end(); }

Tokenizer::Tokenizer(TokenizerSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == TokenizerKind::subword)
    subwords_ = std::make_shared<const SubwordVocab>(SubwordVocab::load(*spec_.subword_vocab_path));
}

Tokenizer::Tokenizer(TokenizerSpec spec, std::shared_ptr<const SubwordVocab> subwords)
    : spec_(std::move(spec)), subwords_(std::move(subwords)) {
  spec_.validate();
  if (spec_.kind != TokenizerKind::subword) subwords_.reset();
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  const auto cps = unicode::decode(text);
  std::vector<std::string> out;
  std::string current;
  auto fold = [&](char32_t cp) { return spec_.lowercase ? unicode::to_lower(cp) : cp; };

  switch (spec_.kind) {
    case TokenizerKind::character:
      out.reserve(cps.size());
      for (char32_t cp : cps) out.push_back(unicode::encode(fold(cp)));
      break;
    case TokenizerKind::word:
      for (char32_t cp : cps) {
        if (unicode::is_whitespace(cp)) {
          flush(current, out);
        } else if (unicode::is_punct_or_symbol(cp)) {
          flush(current, out);
          out.push_back(unicode::encode(fold(cp)));
        } else {
          unicode::append_utf8(current, fold(cp));
        }
      }
      flush(current, out);
      break;
    case TokenizerKind::subword: {
      if (!subwords_) throw PreconditionError("subword vocabulary not loaded");
      auto segment = [&] {
        if (current.empty()) return;
        greedy_segment(*subwords_, current, out);
        current.clear();
      };
      for (char32_t cp : cps) {
        if (unicode::is_whitespace(cp))
          segment();
        else
          unicode::append_utf8(current, fold(cp));
      }
      segment();
      break;
    }
  }
  return out;
}

std::vector<std::string> tokenize(const TokenizerSpec& spec, std::string_view text) {
  if (spec.kind == TokenizerKind::subword) throw PreconditionError("subword vocabulary not loaded");
  return Tokenizer(spec).tokenize(text);
}

std::string_view to_string(Weighting weighting) {
  return weighting == Weighting::tfidf ? "tfidf" : "count";
}

void NGramConfig::validate() const {
  if (orders.empty()) throw PreconditionError("n-gram orders must not be empty");
  for (int n : orders)
    if (n != 1 && n != 2) throw PreconditionError(fmt::format("unsupported n-gram order {}", n));
}

std::set<int> parse_ngram_orders(std::string_view text) {
  if (text == "uni") return {1};
  if (text == "bi") return {2};
  if (text == "uni+bi") return {1, 2};
  std::set<int> orders;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto part = text.substr(start, end - start);
    if (part == "1")
      orders.insert(1);
    else if (part == "2")
      orders.insert(2);
    else
      throw InputError(fmt::format("invalid n-gram orders '{}'", text));
    start = end + 1;
  }
  return orders;
}

std::string format_ngram_orders(const std::set<int>& orders) {
  if (orders == std::set<int>{1}) return "uni";
  if (orders == std::set<int>{2}) return "bi";
  if (orders == std::set<int>{1, 2}) return "uni+bi";
  return "?";
}

void ngram_key(TokenizerKind kind, std::span<const std::string> tokens, std::size_t first,
               std::size_t n, std::string& out) {
  out.clear();
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && kind != TokenizerKind::character) out.push_back(' ');
    out += tokens[first + k];
  }
}

double FeatureVector::get(std::uint32_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.index < i; });
  return (it != entries.end() && it->index == index) ? it->value : 0.0;
}

double FeatureVector::sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value;
  return s;
}

double FeatureVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return std::sqrt(s);
}

void validate(const FeatureVector& v) {
  for (std::size_t i = 0; i < v.entries.size(); ++i) {
    const auto& e = v.entries[i];
    if (e.index >= v.dim) throw PreconditionError("feature index out of bounds");
    if (i > 0 && v.entries[i - 1].index >= e.index)
      throw PreconditionError("feature indices must be strictly increasing");
    if (!(e.value > 0.0) || !std::isfinite(e.value))
      throw PreconditionError("feature values must be positive and finite");
  }
}

Vocabulary::Vocabulary(TokenizerSpec spec, NGramConfig cfg, std::vector<std::string> terms,
                       std::optional<std::vector<double>> idf)
    : spec_(std::move(spec)), cfg_(std::move(cfg)), terms_(std::move(terms)), idf_(std::move(idf)) {
  cfg_.validate();
  if (terms_.empty()) throw PreconditionError("vocabulary must not be empty");
  if ((cfg_.weighting == Weighting::tfidf) != idf_.has_value())
    throw PreconditionError("idf must be present exactly when weighting is tfidf");
  if (idf_) {
    if (idf_->size() != terms_.size()) throw PreconditionError("idf length differs from vocabulary");
    for (double v : *idf_)
      if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError("idf values must be positive");
  }
  index_.reserve(terms_.size());
  for (std::uint32_t i = 0; i < terms_.size(); ++i) {
    if (i > 0 && !(terms_[i - 1] < terms_[i]))
      throw PreconditionError("vocabulary terms must be strictly increasing");
    index_.emplace(terms_[i], i);
  }
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(const Tokenizer& tokenizer, const NGramConfig& cfg,
                            const Dataset& corpus) {
  cfg.validate();
  if (corpus.empty()) throw PreconditionError("cannot build a vocabulary from an empty corpus");

  std::unordered_map<std::string, std::uint32_t> doc_freq;
  std::unordered_set<std::string_view> seen;
  std::string buffer;
  std::size_t total_tokens = 0;
  const auto kind = tokenizer.spec().kind;
  for (const auto& ex : corpus.examples) {
    const auto tokens = tokenizer.tokenize(ex.text);
    total_tokens += tokens.size();
    seen.clear();
    for_each_ngram(kind, tokens, cfg.orders, buffer, [&](std::string_view key) {
      auto [it, inserted] = doc_freq.try_emplace(std::string(key), 0);
      if (seen.insert(it->first).second) ++it->second;
    });
  }
  if (total_tokens == 0 || doc_freq.empty())
    throw PreconditionError("corpus produced no tokens");

  std::vector<std::string> terms;
  terms.reserve(doc_freq.size());
  for (const auto& [term, _] : doc_freq) terms.push_back(term);
  std::sort(terms.begin(), terms.end());

  std::optional<std::vector<double>> idf;
  if (cfg.weighting == Weighting::tfidf) {
    const double n = static_cast<double>(corpus.size());
    idf.emplace();
    idf->reserve(terms.size());
    for (const auto& t : terms)
      idf->push_back(std::log((1.0 + n) / (1.0 + doc_freq.at(t))) + 1.0);
  }
  return Vocabulary(tokenizer.spec(), cfg, std::move(terms), std::move(idf));
}

Vocabulary build_vocabulary(const TokenizerSpec& spec, const NGramConfig& cfg,
                            const Dataset& corpus) {
  return build_vocabulary(Tokenizer(spec), cfg, corpus);
}

FeatureVector transform(const Vocabulary& vocab, const Tokenizer& tokenizer,
                        const NGramConfig& cfg, std::string_view text) {
  if (!(vocab.spec() == tokenizer.spec()) || !(vocab.config() == cfg))
    throw PreconditionError("vocabulary was built with a different tokenizer or n-gram config");

  const auto tokens = tokenizer.tokenize(text);
  std::vector<std::uint32_t> hits;
  hits.reserve(tokens.size() * cfg.orders.size());
  std::string buffer;
  for_each_ngram(tokenizer.spec().kind, tokens, cfg.orders, buffer, [&](std::string_view key) {
    if (auto idx = vocab.find(key)) hits.push_back(*idx);
  });
  std::sort(hits.begin(), hits.end());

  FeatureVector v;
  v.dim = vocab.dim();
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    v.entries.push_back({hits[i], static_cast<double>(j - i)});
    i = j;
  }
  if (cfg.weighting == Weighting::tfidf && !v.entries.empty()) {
    const auto& idf = *vocab.idf();
    for (auto& e : v.entries) e.value *= idf[e.index];
    const double norm = v.norm();
    for (auto& e : v.entries) e.value /= norm;
  }
  return v;
}

FeatureVector transform(const Vocabulary& vocab, const TokenizerSpec& spec,
                        const NGramConfig& cfg, std::string_view text) {
  if (spec.kind == TokenizerKind::subword) throw PreconditionError("subword vocabulary not loaded");
  return transform(vocab, Tokenizer(spec), cfg, text);
}

}  // namespace moje
