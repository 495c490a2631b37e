#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cforge {

enum class Casing { kCased, kUncased };

std::string_view to_string(Casing casing);
/// Accepts "cased" / "uncased"; throws ConfigError otherwise.
Casing parse_casing(std::string_view text);

struct WordNormalization {
  Casing casing = Casing::kCased;
  bool strip_accents = false;
};

/// Splits on whitespace and isolates punctuation characters as one-character
/// words. A '-' with a non-space, non-punctuation neighbour on both sides
/// stays inside its word ("a-mi" is one word). Appends to `words`.
void pretokenize(std::string_view line, std::vector<std::string>& words);
std::vector<std::string> pretokenize(std::string_view line);

/// Lowercases for uncased vocabularies, then drops nonspacing marks after
/// canonical decomposition when `strip_accents` is set. Idempotent.
std::string normalize_word(std::string_view word, const WordNormalization& normalization);

/// pretokenize + normalize_word, skipping words that normalize to nothing.
void normalized_words(std::string_view line, const WordNormalization& normalization,
                      std::vector<std::string>& words);

}  // namespace cforge
