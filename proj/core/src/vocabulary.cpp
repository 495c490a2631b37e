#include "cforge/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "cforge/error.hpp"
#include "cforge/unicode.hpp"
#include "json.hpp"

namespace cforge {

std::vector<std::string> default_special_tokens() {
  return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

bool is_continuation(std::string_view piece) {
  return piece.size() > kContinuationPrefix.size() && piece.starts_with(kContinuationPrefix);
}

std::string merged_piece(std::string_view left, std::string_view right) {
  std::string out(left);
  out.append(is_continuation(right) ? right.substr(kContinuationPrefix.size()) : right);
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> pieces, std::vector<std::string> special_tokens,
                       std::vector<char32_t> alphabet, std::vector<Merge> merges,
                       WordNormalization normalization)
    : pieces_(std::move(pieces)),
      special_tokens_(std::move(special_tokens)),
      alphabet_(std::move(alphabet)),
      merges_(std::move(merges)),
      normalization_(normalization) {
  piece_to_id_.reserve(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!piece_to_id_.emplace(pieces_[i], static_cast<TokenId>(i)).second) {
      throw ParseError("duplicate piece '" + pieces_[i] + "'", i + 1);
    }
  }
  validate();
  unk_id_ = *find(std::string(kUnkToken));
  for (std::size_t i = special_tokens_.size(); i < pieces_.size(); ++i) {
    std::string_view p = pieces_[i];
    if (is_continuation(p)) p.remove_prefix(kContinuationPrefix.size());
    max_piece_chars_ = std::max(max_piece_chars_, unicode::length(p));
  }
}

std::optional<TokenId> Vocabulary::find(const std::string& piece) const {
  const auto it = piece_to_id_.find(piece);
  if (it == piece_to_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> Vocabulary::special_id(std::string_view token) const {
  for (std::size_t i = 0; i < special_tokens_.size(); ++i) {
    if (special_tokens_[i] == token) return static_cast<TokenId>(i);
  }
  return std::nullopt;
}

void Vocabulary::validate() const {
  if (special_tokens_.empty()) throw ParseError("vocabulary has no special tokens");
  if (std::find(special_tokens_.begin(), special_tokens_.end(), kUnkToken) ==
      special_tokens_.end()) {
    throw ParseError("special tokens must include " + std::string(kUnkToken));
  }
  if (pieces_.size() < special_tokens_.size()) {
    throw ParseError("vocabulary is shorter than its special token list",
                     pieces_.size() + 1);
  }
  for (std::size_t i = 0; i < special_tokens_.size(); ++i) {
    if (pieces_[i] != special_tokens_[i]) {
      throw ParseError("expected special token '" + special_tokens_[i] + "'", i + 1);
    }
  }
  if (!std::is_sorted(alphabet_.begin(), alphabet_.end()) ||
      std::adjacent_find(alphabet_.begin(), alphabet_.end()) != alphabet_.end()) {
    throw ParseError("alphabet must be sorted and free of duplicates");
  }

  std::unordered_set<std::string> merge_outputs;
  for (const Merge& m : merges_) {
    if (!piece_to_id_.contains(m.left) || !piece_to_id_.contains(m.right)) {
      throw ParseError("merge (" + m.left + ", " + m.right + ") uses an unknown piece");
    }
    if (!is_continuation(m.right)) {
      throw ParseError("merge (" + m.left + ", " + m.right + ") has a non-continuation right side");
    }
    std::string out = merged_piece(m.left, m.right);
    if (!piece_to_id_.contains(out)) {
      throw ParseError("merge output '" + out + "' is missing from the vocabulary");
    }
    merge_outputs.insert(std::move(out));
  }

  for (std::size_t i = special_tokens_.size(); i < pieces_.size(); ++i) {
    const std::string& piece = pieces_[i];
    if (piece.empty() || piece == kContinuationPrefix) {
      throw ParseError("empty piece", i + 1);
    }
    const std::u32string chars = unicode::decode_lossy(piece);
    if (std::any_of(chars.begin(), chars.end(), [](char32_t c) {
          return unicode::is_whitespace(c) || c == unicode::kReplacementChar;
        })) {
      throw ParseError("piece contains whitespace or invalid UTF-8", i + 1);
    }
    std::size_t body = is_continuation(piece) ? 2 : 0;
    if (chars.size() - body == 1) {
      if (!std::binary_search(alphabet_.begin(), alphabet_.end(), chars.back())) {
        throw ParseError("single-character piece '" + piece + "' is not in the alphabet", i + 1);
      }
    } else if (!merge_outputs.contains(piece)) {
      throw ParseError("piece '" + piece + "' is not produced by any merge", i + 1);
    }
  }
}

std::filesystem::path vocab_header_path(const std::filesystem::path& vocab_path) {
  std::filesystem::path header = vocab_path;
  header += ".json";
  return header;
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const std::string& piece : vocab.pieces()) out << piece << '\n';
    if (!out.flush()) throw IoError("write failed on " + path.string());
  }

  nlohmann::ordered_json header;
  header["casing"] = std::string(to_string(vocab.casing()));
  header["strip_accents"] = vocab.strip_accents();
  header["special_tokens"] = vocab.special_tokens();
  auto& alphabet = header["alphabet"] = nlohmann::ordered_json::array();
  for (char32_t c : vocab.alphabet()) {
    std::string s;
    unicode::append_utf8(s, c);
    alphabet.push_back(s);
  }
  auto& merges = header["merges"] = nlohmann::ordered_json::array();
  for (const Merge& m : vocab.merges()) merges.push_back({m.left, m.right});

  const auto header_path = vocab_header_path(path);
  std::ofstream out(header_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + header_path.string());
  out << header.dump() << '\n';
  if (!out.flush()) throw IoError("write failed on " + header_path.string());
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  if (pieces.empty()) throw ParseError("empty vocabulary file (special tokens required)", 1);

  const auto header_path = vocab_header_path(path);
  std::ifstream header_in(header_path, std::ios::binary);
  if (!header_in) throw IoError("missing vocabulary header " + header_path.string());

  nlohmann::json header;
  std::vector<std::string> specials;
  std::vector<char32_t> alphabet;
  std::vector<Merge> merges;
  WordNormalization normalization;
  try {
    header = nlohmann::json::parse(header_in);
    normalization.casing = parse_casing(header.at("casing").get<std::string>());
    normalization.strip_accents = header.at("strip_accents").get<bool>();
    specials = header.value("special_tokens", default_special_tokens());
    for (const auto& item : header.at("alphabet")) {
      const std::u32string chars = unicode::decode_lossy(item.get<std::string>());
      if (chars.size() != 1) throw ParseError("alphabet entries must be single characters");
      alphabet.push_back(chars[0]);
    }
    for (const auto& item : header.at("merges")) {
      if (!item.is_array() || item.size() != 2) throw ParseError("merges must be pairs");
      merges.push_back({item[0].get<std::string>(), item[1].get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(header_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(header_path.string() + ": " + e.what());
  }
  return Vocabulary(std::move(pieces), std::move(specials), std::move(alphabet),
                    std::move(merges), normalization);
}

}  // namespace cforge
