#pragma once

// Slow, obviously-correct reference implementations used to check the
// library. They share no code with it beyond plain data types.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

// Splits a valid UTF-8 string into one string per codepoint.
inline std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    const std::size_t n = b < 0x80 ? 1 : b < 0xE0 ? 2 : b < 0xF0 ? 3 : 4;
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

inline char32_t first_codepoint(std::string_view c) {
  const auto b = static_cast<unsigned char>(c[0]);
  if (b < 0x80) return b;
  const std::size_t n = b < 0xE0 ? 2 : b < 0xF0 ? 3 : 4;
  char32_t cp = b & (0x7F >> n);
  for (std::size_t k = 1; k < n; ++k) cp = (cp << 6) | (static_cast<unsigned char>(c[k]) & 0x3F);
  return cp;
}

using Freqs = std::map<std::string, std::uint64_t, std::less<>>;

// Top `cap` characters by weighted count, ties to the lower codepoint;
// returned as codepoints in ascending order.
inline std::vector<char32_t> alphabet(const Freqs& freqs, std::size_t cap) {
  std::map<char32_t, std::uint64_t> counts;
  for (const auto& [w, f] : freqs) {
    for (const auto& c : utf8_chars(w)) counts[first_codepoint(c)] += f;
  }
  std::vector<std::pair<char32_t, std::uint64_t>> all(counts.begin(), counts.end());
  // Stable sort on an ascending-codepoint list keeps ties in codepoint order.
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (all.size() > cap) all.resize(cap);
  std::vector<char32_t> out;
  for (const auto& p : all) out.push_back(p.first);
  std::sort(out.begin(), out.end());
  return out;
}

struct BpeResult {
  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<std::uint64_t> frequencies;
  std::vector<std::string> pieces;
};

// Occurrences of `pair` in `symbols`, scanning left to right and skipping
// past each match.
inline std::uint64_t count_pair(const std::vector<std::string>& symbols,
                                const std::pair<std::string, std::string>& pair) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i + 1 < symbols.size();) {
    if (symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      ++n;
      i += 2;
    } else {
      ++i;
    }
  }
  return n;
}

inline std::string join_pieces(const std::string& left, const std::string& right) {
  return left + (right.starts_with("##") ? right.substr(2) : right);
}

// Greedy BPE that recounts every pair from scratch on every iteration.
inline BpeResult bpe(const Freqs& freqs, const std::vector<std::string>& specials,
                     std::size_t vocab_size, std::size_t cap, std::uint64_t min_freq) {
  const auto alpha = alphabet(freqs, cap);
  const std::set<char32_t> alpha_set(alpha.begin(), alpha.end());

  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
  std::set<std::string> seen_forms;
  for (const auto& [w, f] : freqs) {
    const auto chars = utf8_chars(w);
    bool ok = true;
    for (std::size_t k = 0; k < chars.size(); ++k) {
      if (alpha_set.count(first_codepoint(chars[k])) == 0) {
        ok = false;
        continue;
      }
      seen_forms.insert(k == 0 ? chars[k] : "##" + chars[k]);
    }
    if (!ok) continue;
    std::vector<std::string> symbols;
    for (std::size_t k = 0; k < chars.size(); ++k) {
      symbols.push_back(k == 0 ? chars[k] : "##" + chars[k]);
    }
    words.emplace_back(std::move(symbols), f);
  }

  BpeResult r;
  r.pieces = specials;
  for (char32_t cp : alpha) {
    std::string c;
    for (const auto& [w, f] : freqs) {
      for (const auto& ch : utf8_chars(w)) {
        if (first_codepoint(ch) == cp) c = ch;
      }
      if (!c.empty()) break;
    }
    if (seen_forms.count(c)) r.pieces.push_back(c);
    if (seen_forms.count("##" + c)) r.pieces.push_back("##" + c);
  }
  std::set<std::string> have(r.pieces.begin(), r.pieces.end());

  while (r.pieces.size() < vocab_size) {
    std::set<std::pair<std::string, std::string>> candidates;
    for (const auto& [symbols, f] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        candidates.insert({symbols[i], symbols[i + 1]});
      }
    }
    std::optional<std::pair<std::string, std::string>> best;
    std::uint64_t best_count = 0;
    for (const auto& pair : candidates) {  // ascending, so ties keep the smallest
      std::uint64_t total = 0;
      for (const auto& [symbols, f] : words) total += count_pair(symbols, pair) * f;
      if (total > best_count) {
        best = pair;
        best_count = total;
      }
    }
    if (!best || best_count < min_freq) break;

    const std::string merged = join_pieces(best->first, best->second);
    r.merges.push_back(*best);
    r.frequencies.push_back(best_count);
    if (have.insert(merged).second) r.pieces.push_back(merged);
    for (auto& [symbols, f] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < symbols.size();) {
        if (i + 1 < symbols.size() && symbols[i] == best->first && symbols[i + 1] == best->second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(symbols[i++]);
        }
      }
      symbols = std::move(next);
    }
  }
  return r;
}

// Greedy longest match over a piece set: nullopt means the word is UNK.
inline std::optional<std::vector<std::string>> wordpiece(const std::string& word,
                                                         const std::set<std::string>& pieces) {
  const auto chars = utf8_chars(word);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::optional<std::string> match;
    for (std::size_t end = chars.size(); end > start; --end) {
      std::string cand = start == 0 ? "" : "##";
      for (std::size_t k = start; k < end; ++k) cand += chars[k];
      if (pieces.count(cand)) {
        match = cand;
        start = end;
        break;
      }
    }
    if (!match) return std::nullopt;
    out.push_back(*match);
  }
  return out;
}

// The URL and email grammars, written as regular expressions over bytes.
inline bool has_url(const std::string& line) {
  static const std::regex scheme(R"((https?|ftp)://[^\s])", std::regex::icase);
  static const std::regex www(R"((^|[\x00-\x2F\x3A-\x40\x5B-\x60\x7B-\x7F])www\.[^\s])",
                              std::regex::icase);
  return std::regex_search(line, scheme) || std::regex_search(line, www);
}

inline bool has_email(const std::string& line) {
  static const std::regex email(R"([^\s@]*[^\s]@[^\s]+\.[A-Za-z]{2,12}(?![A-Za-z]))");
  return std::regex_search(line, email);
}

}  // namespace oracle
