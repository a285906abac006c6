#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "moje/error.hpp"
#include "moje/featurize.hpp"

using namespace moje;
using moje::testing::benign;
using Strings = std::vector<std::string>;

namespace {

Dataset docs(std::initializer_list<const char*> texts) {
  Dataset ds{"docs", {}};
  for (const char* t : texts) ds.examples.push_back(benign(t));
  return ds;
}

TokenizerSpec word() { return TokenizerSpec::defaults(TokenizerKind::word); }
TokenizerSpec chars() { return TokenizerSpec::defaults(TokenizerKind::character); }

}  // namespace

TEST(Tokenize, WordSplitsPunctuation) {
  EXPECT_EQ(tokenize(word(), "Ignore previous instructions!"),
            (Strings{"ignore", "previous", "instructions", "!"}));
  EXPECT_EQ(tokenize(word(), "! ! !"), (Strings{"!", "!", "!"}));
  EXPECT_EQ(tokenize(word(), "  a\t\tb\n"), (Strings{"a", "b"}));
  EXPECT_EQ(tokenize(word(), "don't"), (Strings{"don", "'", "t"}));
  EXPECT_TRUE(tokenize(word(), "   ").empty());
}

TEST(Tokenize, WordHonoursLowercaseFlag) {
  auto spec = word();
  spec.lowercase = false;
  EXPECT_EQ(tokenize(spec, "DAN Mode"), (Strings{"DAN", "Mode"}));
  EXPECT_EQ(tokenize(word(), "ÉCOLE"), (Strings{"école"}));
}

TEST(Tokenize, CharacterSplit) {
  EXPECT_EQ(tokenize(chars(), "Ab!"), (Strings{"a", "b", "!"}));
  EXPECT_EQ(tokenize(chars(), "é€"), (Strings{"é", "€"}));
  EXPECT_EQ(tokenize(chars(), "a b"), (Strings{"a", " ", "b"}));
}

TEST(Tokenize, RejectsInvalidUtf8) { EXPECT_THROW(tokenize(word(), "bad \xFF byte"), InputError); }

TEST(Tokenize, SubwordGreedyLongestMatch) {
  auto table = std::make_shared<const SubwordVocab>(Strings{"un", "unfil", "tered", "t", "e", "red", "!"});
  auto spec = TokenizerSpec::defaults(TokenizerKind::subword);
  spec.subword_vocab_path = "inline";
  const Tokenizer tok(spec, table);
  EXPECT_EQ(tok.tokenize("unfiltered!"), (Strings{"unfil", "tered", "!"}));
  EXPECT_EQ(tok.tokenize("untex"), (Strings{"un", "t", "e", std::string(SubwordVocab::kUnknown)}));
  EXPECT_EQ(tok.tokenize("Un"), (Strings{std::string(SubwordVocab::kUnknown), std::string(SubwordVocab::kUnknown)}));
  EXPECT_THROW(tokenize(spec, "x"), Error);
}

TEST(Tokenize, SubwordVocabFromFile) {
  moje::testing::TempDir dir;
  moje::testing::write_text(dir / "vocab.txt", "ab\nc\n\nabc\n");
  auto spec = TokenizerSpec::defaults(TokenizerKind::subword);
  spec.subword_vocab_path = dir / "vocab.txt";
  const Tokenizer tok(spec);
  EXPECT_EQ(tok.tokenize("abcab"), (Strings{"abc", "ab"}));
  spec.subword_vocab_path = dir / "missing.txt";
  EXPECT_THROW(Tokenizer{spec}, InputError);
}

TEST(NGrams, ParseOrders) {
  EXPECT_EQ(parse_ngram_orders("uni"), (std::set<int>{1}));
  EXPECT_EQ(parse_ngram_orders("bi"), (std::set<int>{2}));
  EXPECT_EQ(parse_ngram_orders("uni+bi"), (std::set<int>{1, 2}));
  EXPECT_EQ(parse_ngram_orders("1,2"), (std::set<int>{1, 2}));
  EXPECT_THROW(parse_ngram_orders("tri-ish"), InputError);
  EXPECT_EQ(format_ngram_orders({1, 2}), "uni+bi");
}

TEST(Vocabulary, CharUnigrams) {
  const auto v = build_vocabulary(chars(), {}, docs({"ab", "bc"}));
  EXPECT_EQ(v.dim(), 3u);
  EXPECT_EQ(v.terms(), (Strings{"a", "b", "c"}));
}

TEST(Vocabulary, WordUniAndBigrams) {
  const auto v = build_vocabulary(word(), NGramConfig{{1, 2}, Weighting::count}, docs({"a b"}));
  EXPECT_EQ(v.dim(), 3u);
  EXPECT_TRUE(v.find("a"));
  EXPECT_TRUE(v.find("b"));
  EXPECT_TRUE(v.find("a b"));
}

TEST(Vocabulary, UnionOfOrdersIsAdditive) {
  const auto corpus = docs({"the cat sat", "the dog sat down", "a cat!"});
  for (auto spec : {word(), chars()}) {
    const auto uni = build_vocabulary(spec, NGramConfig{{1}, Weighting::count}, corpus).dim();
    const auto bi = build_vocabulary(spec, NGramConfig{{2}, Weighting::count}, corpus).dim();
    const auto both = build_vocabulary(spec, NGramConfig{{1, 2}, Weighting::count}, corpus).dim();
    EXPECT_EQ(both, uni + bi);
  }
}

TEST(Vocabulary, IdfFormula) {
  const auto v = build_vocabulary(chars(), NGramConfig{{1}, Weighting::tfidf}, docs({"ab", "a"}));
  ASSERT_TRUE(v.idf());
  EXPECT_DOUBLE_EQ((*v.idf())[*v.find("a")], 1.0);
  EXPECT_NEAR((*v.idf())[*v.find("b")], 1.4055, 5e-5);
  EXPECT_DOUBLE_EQ((*v.idf())[*v.find("b")], std::log(1.5) + 1.0);
}

TEST(Transform, CountsCharacters) {
  const auto v = build_vocabulary(chars(), {}, docs({"abc"}));
  const auto x = transform(v, chars(), {}, "abca");
  EXPECT_EQ(x.dim, 3u);
  ASSERT_EQ(x.entries.size(), 3u);
  EXPECT_EQ(x.entries[0], (FeatureVector::Entry{0, 2.0}));
  EXPECT_EQ(x.entries[1], (FeatureVector::Entry{1, 1.0}));
  EXPECT_EQ(x.entries[2], (FeatureVector::Entry{2, 1.0}));
}

TEST(Transform, OutOfVocabularyIsEmpty) {
  const auto v = build_vocabulary(word(), {}, docs({"hello world"}));
  const auto x = transform(v, word(), {}, "nothing known here");
  EXPECT_TRUE(x.empty());
  EXPECT_EQ(x.dim, v.dim());
  EXPECT_TRUE(transform(v, word(), {}, "").empty());
}

TEST(Transform, TfIdfIsUnitNorm) {
  const NGramConfig cfg{{1}, Weighting::tfidf};
  const auto v = build_vocabulary(chars(), cfg, docs({"ab", "a"}));
  const auto x = transform(v, chars(), cfg, "abb");
  EXPECT_NEAR(x.norm(), 1.0, 1e-12);
  // count*idf before normalizing: a -> 1, b -> 2 * (ln 1.5 + 1)
  const double b = 2.0 * (std::log(1.5) + 1.0);
  EXPECT_NEAR(x.get(1) / x.get(0), b, 1e-12);
}

TEST(Transform, RejectsMismatchedConfig) {
  const auto v = build_vocabulary(word(), {}, docs({"a b"}));
  EXPECT_THROW(transform(v, chars(), {}, "a"), PreconditionError);
  EXPECT_THROW(transform(v, word(), NGramConfig{{2}, Weighting::count}, "a"), PreconditionError);
}

TEST(Transform, VectorInvariants) {
  const NGramConfig cfg{{1, 2}, Weighting::count};
  const auto corpus = synthetic::make_corpus(moje::testing::small_corpus_options());
  const Tokenizer tok(word());
  const auto v = build_vocabulary(tok, cfg, corpus);
  for (std::size_t i = 0; i < corpus.size(); i += 17) {
    const auto x = transform(v, tok, cfg, corpus.examples[i].text);
    EXPECT_NO_THROW(validate(x));
    EXPECT_FALSE(x.empty());
  }
}
