#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/byte_source.hpp"
#include "cforge/vocabulary.hpp"

namespace cforge {

/// Words longer than this many characters become [UNK] without matching.
inline constexpr std::size_t kMaxWordChars = 100;

struct TokenizationResult {
  std::vector<std::string> pieces;
  std::vector<TokenId> ids;
  std::size_t unk_count = 0;
  std::size_t word_count = 0;
};

struct TokenizerMetrics {
  std::uint64_t words_measured = 0;
  std::uint64_t total_pieces = 0;
  std::uint64_t unk_pieces = 0;

  double tokens_per_word() const;
  double unk_per_word() const;

  void add(const TokenizationResult& result);
  void merge(const TokenizerMetrics& other);

  /// {"tokens_per_word", "unk_per_word", "words_measured"}, rates rounded to
  /// four decimals.
  std::string to_json() const;
};

std::string normalize_word(std::string_view word, const Vocabulary& vocab);

/// Greedy longest-match-first segmentation of an already normalized word.
/// Any position without a matching piece turns the whole word into [UNK].
std::vector<std::string> tokenize_word(std::string_view word, const Vocabulary& vocab);

/// Reusable segmentation state; not thread-safe, one per worker.
class WordPieceTokenizer {
 public:
  explicit WordPieceTokenizer(const Vocabulary& vocab) : vocab_(vocab) {}

  /// Appends the piece ids of `word` (normalized) to `ids`. Returns false
  /// when the word became [UNK].
  bool tokenize_word(std::string_view word, std::vector<TokenId>& ids);

  TokenizationResult tokenize_line(std::string_view line);

  /// Ids only, for packing.
  void line_ids(std::string_view line, std::vector<TokenId>& ids);

  const Vocabulary& vocab() const noexcept { return vocab_; }

 private:
  const Vocabulary& vocab_;
  std::vector<std::size_t> offsets_;
  std::vector<std::string> words_;
  std::string candidate_;
};

TokenizationResult tokenize_line(std::string_view line, const Vocabulary& vocab);

/// Joins pieces back into text: "##" pieces attach to their predecessor and
/// other pieces are separated by one space. Throws std::invalid_argument when
/// the first piece is a continuation.
std::string detokenize(const std::vector<std::string>& pieces);

/// Aggregates tokenize_line over every line. Throws std::invalid_argument if
/// the corpus contains no words.
TokenizerMetrics measure(ByteSource& corpus, const Vocabulary& vocab, std::size_t workers = 1);

}  // namespace cforge
