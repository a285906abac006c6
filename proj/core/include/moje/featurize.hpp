#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moje/corpus.hpp"

namespace moje {

enum class TokenizerKind : std::uint8_t { character, word, subword };

std::string_view to_string(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(std::string_view text);

struct TokenizerSpec {
  TokenizerKind kind = TokenizerKind::word;
  bool lowercase = true;
  std::optional<std::filesystem::path> subword_vocab_path;

  /// Char/Word lowercase, Subword keeps case.
  static TokenizerSpec defaults(TokenizerKind kind);
  void validate() const;
  bool operator==(const TokenizerSpec&) const = default;
};

/// Token table for greedy longest-match segmentation. Index = line number of
/// the source file.
class SubwordVocab {
 public:
  static constexpr std::string_view kUnknown = "[UNK]";

  explicit SubwordVocab(std::vector<std::string> tokens);
  static SubwordVocab load(const std::filesystem::path& path);

  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view piece) const;
  std::size_t max_token_bytes() const { return max_bytes_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
  std::size_t max_bytes_ = 0;
};

/// A TokenizerSpec with its subword table resolved. Immutable and cheap to
/// copy; safe to share between threads.
class Tokenizer {
 public:
  Tokenizer() = default;
  /// Loads the subword vocabulary from spec.subword_vocab_path when needed.
  explicit Tokenizer(TokenizerSpec spec);
  Tokenizer(TokenizerSpec spec, std::shared_ptr<const SubwordVocab> subwords);

  const TokenizerSpec& spec() const { return spec_; }
  const SubwordVocab* subwords() const { return subwords_.get(); }

  std::vector<std::string> tokenize(std::string_view text) const;

 private:
  TokenizerSpec spec_;
  std::shared_ptr<const SubwordVocab> subwords_;
};

/// Char/Word only; Subword specs need a loaded table and throw
/// PreconditionError here.
std::vector<std::string> tokenize(const TokenizerSpec& spec, std::string_view text);

enum class Weighting : std::uint8_t { count, tfidf };

std::string_view to_string(Weighting weighting);

struct NGramConfig {
  std::set<int> orders = {1};
  Weighting weighting = Weighting::count;

  void validate() const;
  bool operator==(const NGramConfig&) const = default;
};

/// Parses "1", "2", "1,2" / "uni", "bi", "uni+bi".
std::set<int> parse_ngram_orders(std::string_view text);
std::string format_ngram_orders(const std::set<int>& orders);

/// Joins tokens [first, first+n) into one n-gram key. Char tokens are
/// concatenated, other kinds are joined by a single space (their tokens never
/// contain whitespace, so the key is unambiguous).
void ngram_key(TokenizerKind kind, std::span<const std::string> tokens, std::size_t first,
               std::size_t n, std::string& out);

/// Sparse non-negative vector: strictly increasing indices, no stored zeros.
struct FeatureVector {
  struct Entry {
    std::uint32_t index;
    double value;
    bool operator==(const Entry&) const = default;
  };

  std::uint32_t dim = 0;
  std::vector<Entry> entries;

  bool empty() const { return entries.empty(); }
  double get(std::uint32_t index) const;
  double sum() const;
  double norm() const;
  bool operator==(const FeatureVector&) const = default;
};

/// Checks the FeatureVector invariants; throws PreconditionError.
void validate(const FeatureVector& v);

/// n-gram term table fitted on a corpus. Terms are sorted bytewise, so
/// index assignment depends only on the set of observed n-grams.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// `terms` must be strictly increasing. `idf` is required iff
  /// cfg.weighting is tfidf and must be positive.
  Vocabulary(TokenizerSpec spec, NGramConfig cfg, std::vector<std::string> terms,
             std::optional<std::vector<double>> idf);

  std::uint32_t dim() const { return static_cast<std::uint32_t>(terms_.size()); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::optional<std::vector<double>>& idf() const { return idf_; }
  const TokenizerSpec& spec() const { return spec_; }
  const NGramConfig& config() const { return cfg_; }

  std::optional<std::uint32_t> find(std::string_view term) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  TokenizerSpec spec_;
  NGramConfig cfg_;
  std::vector<std::string> terms_;
  std::optional<std::vector<double>> idf_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

/// Every n-gram seen at least once. idf(t) = ln((1+N)/(1+df(t))) + 1 when
/// weighting is tfidf. Throws PreconditionError on an empty corpus or one
/// that yields no tokens.
Vocabulary build_vocabulary(const Tokenizer& tokenizer, const NGramConfig& cfg,
                            const Dataset& corpus);
Vocabulary build_vocabulary(const TokenizerSpec& spec, const NGramConfig& cfg,
                            const Dataset& corpus);

/// Count: raw in-vocabulary n-gram counts. TfIdf: count * idf, L2-normalized.
/// Out-of-vocabulary n-grams are dropped. Throws PreconditionError when the
/// tokenizer/config differ from what the vocabulary was built with.
FeatureVector transform(const Vocabulary& vocab, const Tokenizer& tokenizer,
                        const NGramConfig& cfg, std::string_view text);
FeatureVector transform(const Vocabulary& vocab, const TokenizerSpec& spec,
                        const NGramConfig& cfg, std::string_view text);

}  // namespace moje
