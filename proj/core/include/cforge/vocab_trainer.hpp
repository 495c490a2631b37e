#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cforge/byte_source.hpp"
#include "cforge/vocabulary.hpp"

namespace cforge {

struct VocabConfig {
  std::size_t vocab_size = 50000;
  std::size_t alphabet_cap = 2000;
  Casing casing = Casing::kCased;
  bool strip_accents = false;
  std::vector<std::string> special_tokens = default_special_tokens();
  std::uint64_t min_pair_frequency = 2;

  WordNormalization normalization() const { return {casing, strip_accents}; }

  /// Data-independent checks (alphabet_cap, special tokens). The size check
  /// against the learned alphabet happens in train_bpe.
  void validate() const;
};

using WordFreqs = std::map<std::string, std::uint64_t, std::less<>>;

/// Counts normalized pre-tokenized words over every line of `corpus`.
WordFreqs count_words(ByteSource& corpus, const VocabConfig& config, std::size_t workers = 1);
void add_line_counts(std::string_view line, const VocabConfig& config, WordFreqs& freqs);

/// The `cap` most frequent characters, weighted by word frequency. Ties go
/// to the lower codepoint. Returned sorted by codepoint.
std::vector<char32_t> build_alphabet(const WordFreqs& word_freqs, std::size_t cap);

struct TrainStats {
  std::size_t words_total = 0;
  std::size_t words_excluded = 0;  // contain an out-of-alphabet character
  std::vector<std::uint64_t> merge_frequencies;
};

using TrainProgress = std::function<void(std::size_t merges_done, std::size_t pieces)>;

/// Greedy BPE over word symbol sequences in WordPiece surface form (non-initial
/// symbols carry "##"). Pair frequencies count non-overlapping occurrences
/// left to right, weighted by word frequency; ties go to the
/// lexicographically smallest (left, right). Throws ConfigError when the
/// budget cannot hold the special tokens and the alphabet.
Vocabulary train_bpe(const WordFreqs& word_freqs, const VocabConfig& config,
                     TrainStats* stats = nullptr, const TrainProgress& progress = {});

/// Optional word-frequency cache: "word\tcount" per line, sorted by word.
void save_word_freqs(const WordFreqs& freqs, const std::filesystem::path& path);
WordFreqs load_word_freqs(const std::filesystem::path& path);

}  // namespace cforge
