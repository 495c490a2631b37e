// Randomized checks of the algebraic properties of the per-line operations.

#include <random>

#include "cforge/cleaner.hpp"
#include "cforge/pretokenize.hpp"
#include "cforge/tokenizer.hpp"
#include "cforge/unicode.hpp"
#include "cforge/vocab_trainer.hpp"
#include "doctest.h"
#include "fuzz.hpp"
#include "toy_corpus.hpp"

using namespace cforge;

TEST_SUITE("properties") {

TEST_CASE("each repair transform is idempotent") {
  const CleanConfig cfg;
  testing::LineFuzzer fuzz(1);
  for (int i = 0; i < 3000; ++i) {
    // The transforms expect decoded text; start from valid UTF-8.
    const std::string x = unicode::encode(unicode::decode_lossy(fuzz.line()));
    const std::string n = normalize_chars(x, cfg);
    CHECK(normalize_chars(n, cfg) == n);
    const std::string f = fix_spacing_artifacts(x);
    CHECK(fix_spacing_artifacts(f) == f);
    const std::string s = strip_patterns(x, cfg);
    CHECK(strip_patterns(s, cfg) == s);
  }
}

TEST_CASE("clean_line verdicts are consistent") {
  const CleanConfig cfg;
  testing::LineFuzzer fuzz(2);
  for (int i = 0; i < 3000; ++i) {
    const auto r = clean_line(i % 2 ? fuzz.line() : fuzz.prose_line(), cfg);
    CHECK(r.verdict.kept == r.line.has_value());
    CHECK(r.verdict.kept != r.verdict.drop_rule.has_value());
  }
}

TEST_CASE("pretokenize output has no whitespace and normalization is idempotent") {
  testing::LineFuzzer fuzz(3);
  const WordNormalization norms[] = {
      {Casing::kCased, false}, {Casing::kUncased, false}, {Casing::kUncased, true}};
  for (int i = 0; i < 2000; ++i) {
    const std::string x = unicode::encode(unicode::decode_lossy(fuzz.line()));
    for (const auto& w : pretokenize(x)) {
      CHECK_FALSE(w.empty());
      for (char32_t c : unicode::decode_lossy(w)) CHECK_FALSE(unicode::is_whitespace(c));
      for (const auto& norm : norms) {
        const auto once = normalize_word(w, norm);
        CHECK(normalize_word(once, norm) == once);
      }
    }
  }
}

TEST_CASE("tokenizer invariants on random lines") {
  VocabConfig cfg;
  cfg.vocab_size = 150;
  cfg.alphabet_cap = 5;
  const Vocabulary v = train_bpe(testing::random_toy_corpus(5, 50), cfg);
  std::mt19937_64 rng(9);
  const std::vector<std::string> parts = {"a", "b", "c", "d", "e", "ă", "ș", " ", ".", ",", "x"};
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  WordPieceTokenizer tok(v);
  for (int i = 0; i < 3000; ++i) {
    std::string line;
    for (int k = 0; k < 30; ++k) line += parts[pick(rng)];
    const auto r = tok.tokenize_line(line);
    REQUIRE(r.pieces.size() == r.ids.size());
    CHECK(r.unk_count <= r.pieces.size());
    CHECK(r.word_count <= r.pieces.size());
    std::size_t words_started = 0;
    for (std::size_t k = 0; k < r.pieces.size(); ++k) {
      CHECK(v.piece(r.ids[k]) == r.pieces[k]);
      if (!is_continuation(r.pieces[k])) ++words_started;
    }
    CHECK(words_started == r.word_count);
    if (r.unk_count == 0) {
      std::string expected;
      std::vector<std::string> words;
      normalized_words(line, v.normalization(), words);
      for (const auto& w : words) expected += (expected.empty() ? "" : " ") + w;
      CHECK(detokenize(r.pieces) == expected);
    }
  }
}

}  // TEST_SUITE
