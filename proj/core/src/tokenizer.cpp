#include "cforge/tokenizer.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "cforge/unicode.hpp"
#include "json.hpp"

namespace cforge {

double TokenizerMetrics::tokens_per_word() const {
  return words_measured == 0 ? 0.0
                             : static_cast<double>(total_pieces) / static_cast<double>(words_measured);
}

double TokenizerMetrics::unk_per_word() const {
  return words_measured == 0 ? 0.0
                             : static_cast<double>(unk_pieces) / static_cast<double>(words_measured);
}

void TokenizerMetrics::add(const TokenizationResult& result) {
  words_measured += result.word_count;
  total_pieces += result.pieces.size();
  unk_pieces += result.unk_count;
}

void TokenizerMetrics::merge(const TokenizerMetrics& other) {
  words_measured += other.words_measured;
  total_pieces += other.total_pieces;
  unk_pieces += other.unk_pieces;
}

std::string TokenizerMetrics::to_json() const {
  auto round4 = [](double x) { return std::round(x * 1e4) / 1e4; };
  nlohmann::ordered_json j;
  j["tokens_per_word"] = round4(tokens_per_word());
  j["unk_per_word"] = round4(unk_per_word());
  j["words_measured"] = words_measured;
  return j.dump();
}

std::string normalize_word(std::string_view word, const Vocabulary& vocab) {
  return normalize_word(word, vocab.normalization());
}

bool WordPieceTokenizer::tokenize_word(std::string_view word, std::vector<TokenId>& ids) {
  unicode::codepoint_offsets(word, offsets_);
  const std::size_t chars = offsets_.size() - 1;
  if (chars == 0) return true;
  if (chars > kMaxWordChars) {
    ids.push_back(vocab_.unk_id());
    return false;
  }

  const std::size_t first = ids.size();
  const std::size_t longest = vocab_.max_piece_chars();
  std::size_t start = 0;
  while (start < chars) {
    std::size_t end = std::min(chars, start + longest);
    std::optional<TokenId> found;
    for (; end > start; --end) {
      candidate_.clear();
      if (start > 0) candidate_.append(kContinuationPrefix);
      candidate_.append(word.substr(offsets_[start], offsets_[end] - offsets_[start]));
      found = vocab_.find(candidate_);
      if (found) break;
    }
    if (!found) {
      ids.resize(first);
      ids.push_back(vocab_.unk_id());
      return false;
    }
    ids.push_back(*found);
    start = end;
  }
  return true;
}

void WordPieceTokenizer::line_ids(std::string_view line, std::vector<TokenId>& ids) {
  words_.clear();
  normalized_words(line, vocab_.normalization(), words_);
  for (const std::string& w : words_) tokenize_word(w, ids);
}

TokenizationResult WordPieceTokenizer::tokenize_line(std::string_view line) {
  TokenizationResult result;
  words_.clear();
  normalized_words(line, vocab_.normalization(), words_);
  result.word_count = words_.size();
  for (const std::string& w : words_) {
    if (!tokenize_word(w, result.ids)) ++result.unk_count;
  }
  result.pieces.reserve(result.ids.size());
  for (TokenId id : result.ids) result.pieces.push_back(vocab_.piece(id));
  return result;
}

std::vector<std::string> tokenize_word(std::string_view word, const Vocabulary& vocab) {
  WordPieceTokenizer tokenizer(vocab);
  std::vector<TokenId> ids;
  tokenizer.tokenize_word(word, ids);
  std::vector<std::string> pieces;
  pieces.reserve(ids.size());
  for (TokenId id : ids) pieces.push_back(vocab.piece(id));
  return pieces;
}

TokenizationResult tokenize_line(std::string_view line, const Vocabulary& vocab) {
  return WordPieceTokenizer(vocab).tokenize_line(line);
}

std::string detokenize(const std::vector<std::string>& pieces) {
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::string& p = pieces[i];
    if (is_continuation(p)) {
      if (i == 0) throw std::invalid_argument("detokenize: first piece '" + p + "' is a continuation");
      out.append(p, kContinuationPrefix.size());
    } else {
      if (i > 0) out.push_back(' ');
      out.append(p);
    }
  }
  return out;
}

TokenizerMetrics measure(ByteSource& corpus, const Vocabulary& vocab, std::size_t workers) {
  LineReader reader(corpus);
  TokenizerMetrics total;
  std::string_view line;
  if (workers <= 1) {
    WordPieceTokenizer tokenizer(vocab);
    while (reader.next(line)) total.add(tokenizer.tokenize_line(line));
  } else {
    constexpr std::size_t kBatchLines = 4096;
    std::vector<std::vector<std::string>> batches(workers);
    std::vector<TokenizerMetrics> partial(workers);
    for (bool more = true; more;) {
      std::size_t filled = 0;
      for (; filled < workers; ++filled) {
        auto& batch = batches[filled];
        batch.clear();
        while (batch.size() < kBatchLines && reader.next(line)) batch.emplace_back(line);
        if (batch.empty()) break;
      }
      more = filled == workers;
      {
        std::vector<std::jthread> threads;
        for (std::size_t b = 0; b < filled; ++b) {
          threads.emplace_back([&, b] {
            WordPieceTokenizer tokenizer(vocab);
            for (const auto& l : batches[b]) partial[b].add(tokenizer.tokenize_line(l));
          });
        }
      }
      for (std::size_t b = 0; b < filled; ++b) {
        total.merge(partial[b]);
        partial[b] = TokenizerMetrics{};
      }
    }
  }
  if (total.words_measured == 0) throw std::invalid_argument("measure: corpus contains no words");
  return total;
}

}  // namespace cforge
