#include "cforge/pretokenize.hpp"

#include "cforge/error.hpp"
#include "cforge/unicode.hpp"

namespace cforge {

std::string_view to_string(Casing casing) {
  return casing == Casing::kCased ? "cased" : "uncased";
}

Casing parse_casing(std::string_view text) {
  if (text == "cased") return Casing::kCased;
  if (text == "uncased") return Casing::kUncased;
  throw ConfigError("casing must be 'cased' or 'uncased', got '" + std::string(text) + "'");
}

void pretokenize(std::string_view line, std::vector<std::string>& words) {
  const std::u32string s = unicode::decode_lossy(line);
  auto word_char = [&](std::size_t k) {
    return !unicode::is_whitespace(s[k]) && !unicode::is_punctuation(s[k]);
  };

  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char32_t c = s[i];
    if (unicode::is_whitespace(c)) {
      flush();
    } else if (unicode::is_punctuation(c) &&
               !(c == U'-' && i > 0 && i + 1 < s.size() && word_char(i - 1) && word_char(i + 1))) {
      flush();
      std::string punct;
      unicode::append_utf8(punct, c);
      words.push_back(std::move(punct));
    } else {
      unicode::append_utf8(current, c);
    }
  }
  flush();
}

std::vector<std::string> pretokenize(std::string_view line) {
  std::vector<std::string> words;
  pretokenize(line, words);
  return words;
}

std::string normalize_word(std::string_view word, const WordNormalization& normalization) {
  std::string out =
      normalization.casing == Casing::kUncased ? unicode::lowercase(word) : std::string(word);
  if (normalization.strip_accents) out = unicode::strip_accents(out);
  return out;
}

void normalized_words(std::string_view line, const WordNormalization& normalization,
                      std::vector<std::string>& words) {
  const std::size_t first = words.size();
  pretokenize(line, words);
  if (normalization.casing == Casing::kCased && !normalization.strip_accents) return;
  std::size_t keep = first;
  for (std::size_t i = first; i < words.size(); ++i) {
    std::string w = normalize_word(words[i], normalization);
    if (!w.empty()) words[keep++] = std::move(w);
  }
  words.resize(keep);
}

}  // namespace cforge
