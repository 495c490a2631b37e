#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cforge/pretokenize.hpp"

namespace cforge {

using TokenId = std::int32_t;

inline constexpr std::string_view kContinuationPrefix = "##";
inline constexpr std::string_view kUnkToken = "[UNK]";

std::vector<std::string> default_special_tokens();  // [PAD] [UNK] [CLS] [SEP] [MASK]

struct Merge {
  std::string left;
  std::string right;

  friend bool operator==(const Merge&, const Merge&) = default;
};

bool is_continuation(std::string_view piece);
/// Piece produced by a merge: `left` followed by `right` minus its "##".
std::string merged_piece(std::string_view left, std::string_view right);

/// Ordered word-piece inventory. Special tokens hold the lowest ids, followed
/// by single-character pieces of the alphabet and then merge outputs.
/// Immutable once constructed, so safe to share between threads.
class Vocabulary {
 public:
  /// Throws ParseError (with the 1-based line of the offending piece) when
  /// the structural invariants do not hold.
  Vocabulary(std::vector<std::string> pieces, std::vector<std::string> special_tokens,
             std::vector<char32_t> alphabet, std::vector<Merge> merges,
             WordNormalization normalization);

  std::size_t size() const noexcept { return pieces_.size(); }
  const std::vector<std::string>& pieces() const noexcept { return pieces_; }
  const std::string& piece(TokenId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> find(const std::string& piece) const;
  bool contains(const std::string& piece) const { return find(piece).has_value(); }

  const std::vector<std::string>& special_tokens() const noexcept { return special_tokens_; }
  std::optional<TokenId> special_id(std::string_view token) const;
  TokenId unk_id() const noexcept { return unk_id_; }

  const std::vector<char32_t>& alphabet() const noexcept { return alphabet_; }
  const std::vector<Merge>& merges() const noexcept { return merges_; }
  const WordNormalization& normalization() const noexcept { return normalization_; }
  Casing casing() const noexcept { return normalization_.casing; }
  bool strip_accents() const noexcept { return normalization_.strip_accents; }

  /// Longest piece length in codepoints, "##" excluded.
  std::size_t max_piece_chars() const noexcept { return max_piece_chars_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.pieces_ == b.pieces_ && a.special_tokens_ == b.special_tokens_ &&
           a.alphabet_ == b.alphabet_ && a.merges_ == b.merges_ &&
           a.normalization_.casing == b.normalization_.casing &&
           a.normalization_.strip_accents == b.normalization_.strip_accents;
  }

 private:
  void validate() const;

  std::vector<std::string> pieces_;
  std::vector<std::string> special_tokens_;
  std::vector<char32_t> alphabet_;
  std::vector<Merge> merges_;
  WordNormalization normalization_;
  std::unordered_map<std::string, TokenId> piece_to_id_;
  TokenId unk_id_ = 0;
  std::size_t max_piece_chars_ = 0;
};

/// Sidecar header path for a vocabulary file: "<path>.json".
std::filesystem::path vocab_header_path(const std::filesystem::path& vocab_path);

/// Writes one piece per line (id = line number - 1) plus the JSON header
/// (casing, strip_accents, special_tokens, alphabet, merges).
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);

/// Throws ParseError naming the offending line, IoError if a file is missing.
Vocabulary load_vocab(const std::filesystem::path& path);

}  // namespace cforge
