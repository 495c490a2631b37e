#include "cforge/vocab_trainer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "cforge/error.hpp"
#include "cforge/unicode.hpp"

namespace cforge {
namespace {

using Counter = std::unordered_map<std::string, std::uint64_t>;

void count_line(std::string_view line, const WordNormalization& norm,
                std::vector<std::string>& scratch, Counter& counter) {
  scratch.clear();
  normalized_words(line, norm, scratch);
  for (std::string& w : scratch) ++counter[std::move(w)];
}

using PairKey = std::uint64_t;

PairKey pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left)) << 32) |
         static_cast<std::uint32_t>(right);
}
TokenId key_left(PairKey key) { return static_cast<TokenId>(key >> 32); }
TokenId key_right(PairKey key) { return static_cast<TokenId>(key & 0xFFFFFFFFu); }

// Adjacent pairs of a symbol sequence. A run of identical symbols contributes
// floor(run/2) copies of its self-pair (non-overlapping, left to right).
void word_pairs(const std::vector<TokenId>& symbols, std::vector<PairKey>& out) {
  out.clear();
  std::ptrdiff_t last_self_pair = -2;
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
    if (symbols[i] == symbols[i + 1]) {
      if (last_self_pair == static_cast<std::ptrdiff_t>(i) - 1) {
        last_self_pair = -2;
        continue;
      }
      last_self_pair = static_cast<std::ptrdiff_t>(i);
    }
    out.push_back(pair_key(symbols[i], symbols[i + 1]));
  }
}

bool apply_merge(std::vector<TokenId>& symbols, TokenId left, TokenId right, TokenId merged) {
  std::size_t w = 0;
  bool changed = false;
  for (std::size_t r = 0; r < symbols.size();) {
    if (r + 1 < symbols.size() && symbols[r] == left && symbols[r + 1] == right) {
      symbols[w++] = merged;
      r += 2;
      changed = true;
    } else {
      symbols[w++] = symbols[r++];
    }
  }
  symbols.resize(w);
  return changed;
}

struct HeapEntry {
  std::uint64_t count;
  PairKey key;
};

class BpeState {
 public:
  BpeState(std::vector<std::string> pieces, std::uint64_t min_frequency)
      : pieces_(std::move(pieces)),
        min_frequency_(min_frequency),
        heap_(Compare{&pieces_}) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      ids_.emplace(pieces_[i], static_cast<TokenId>(i));
    }
  }

  TokenId id_of(const std::string& piece) const { return ids_.at(piece); }

  void add_word(std::vector<TokenId> symbols, std::uint64_t freq) {
    const auto w = static_cast<std::uint32_t>(words_.size());
    word_pairs(symbols, scratch_old_);
    for (PairKey key : scratch_old_) counts_[key] += freq;
    std::sort(scratch_old_.begin(), scratch_old_.end());
    scratch_old_.erase(std::unique(scratch_old_.begin(), scratch_old_.end()), scratch_old_.end());
    for (PairKey key : scratch_old_) where_[key].push_back(w);
    words_.push_back(std::move(symbols));
    freqs_.push_back(freq);
  }

  void seed_heap() {
    for (const auto& [key, count] : counts_) heap_.push({count, key});
  }

  // Runs merges until the budget is reached or no pair is frequent enough.
  void run(std::size_t vocab_size, std::vector<Merge>& merges, TrainStats* stats,
           const TrainProgress& progress) {
    while (pieces_.size() < vocab_size) {
      const auto best = pop_best();
      if (!best || best->count < min_frequency_) break;

      const TokenId left = key_left(best->key);
      const TokenId right = key_right(best->key);
      std::string merged = merged_piece(pieces_[left], pieces_[right]);
      TokenId merged_id;
      if (auto it = ids_.find(merged); it != ids_.end()) {
        merged_id = it->second;
      } else {
        merged_id = static_cast<TokenId>(pieces_.size());
        ids_.emplace(merged, merged_id);
        pieces_.push_back(std::move(merged));
      }
      merges.push_back({pieces_[left], pieces_[right]});
      if (stats != nullptr) stats->merge_frequencies.push_back(best->count);

      merge_everywhere(best->key, left, right, merged_id);
      if (progress && merges.size() % 1000 == 0) progress(merges.size(), pieces_.size());
    }
  }

  std::vector<std::string> take_pieces() { return std::move(pieces_); }

 private:
  struct Compare {
    const std::vector<std::string>* pieces;
    // priority_queue pops the greatest element: highest count first, then
    // the lexicographically smallest (left, right).
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.count != b.count) return a.count < b.count;
      const auto& p = *pieces;
      const int l = p[key_left(a.key)].compare(p[key_left(b.key)]);
      if (l != 0) return l > 0;
      return p[key_right(a.key)].compare(p[key_right(b.key)]) > 0;
    }
  };

  std::optional<HeapEntry> pop_best() {
    while (!heap_.empty()) {
      const HeapEntry top = heap_.top();
      heap_.pop();
      const auto it = counts_.find(top.key);
      const std::uint64_t current = it == counts_.end() ? 0 : it->second;
      if (current == top.count && current > 0) return top;
      // Entries are upper bounds: decreases are repaired lazily here, while
      // increases are always pushed eagerly.
      if (current > 0 && top.count > current) heap_.push({current, top.key});
    }
    return std::nullopt;
  }

  void merge_everywhere(PairKey key, TokenId left, TokenId right, TokenId merged_id) {
    std::vector<std::uint32_t> affected = std::move(where_[key]);
    where_.erase(key);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());

    increased_.clear();
    for (std::uint32_t w : affected) {
      std::vector<TokenId>& symbols = words_[w];
      word_pairs(symbols, scratch_old_);
      if (!apply_merge(symbols, left, right, merged_id)) continue;
      word_pairs(symbols, scratch_new_);
      std::sort(scratch_old_.begin(), scratch_old_.end());
      std::sort(scratch_new_.begin(), scratch_new_.end());
      apply_delta(w, freqs_[w]);
    }
    counts_.erase(key);
    for (PairKey k : increased_) {
      const auto it = counts_.find(k);
      if (it != counts_.end() && it->second > 0) heap_.push({it->second, k});
    }
  }

  // Walks the sorted old/new pair multisets of one word and applies the
  // difference to the global counts.
  void apply_delta(std::uint32_t w, std::uint64_t freq) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < scratch_old_.size() || j < scratch_new_.size()) {
      PairKey k;
      if (j == scratch_new_.size() ||
          (i < scratch_old_.size() && scratch_old_[i] < scratch_new_[j])) {
        k = scratch_old_[i];
      } else {
        k = scratch_new_[j];
      }
      std::int64_t before = 0;
      std::int64_t after = 0;
      while (i < scratch_old_.size() && scratch_old_[i] == k) ++before, ++i;
      while (j < scratch_new_.size() && scratch_new_[j] == k) ++after, ++j;
      if (before == after) continue;
      auto& count = counts_[k];
      if (after > before) {
        count += static_cast<std::uint64_t>(after - before) * freq;
        increased_.insert(k);
        if (before == 0) where_[k].push_back(w);
      } else {
        count -= static_cast<std::uint64_t>(before - after) * freq;
        if (count == 0) counts_.erase(k);
      }
    }
  }

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> ids_;
  std::uint64_t min_frequency_;
  std::vector<std::vector<TokenId>> words_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<PairKey, std::uint64_t> counts_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> where_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, Compare> heap_;
  std::unordered_set<PairKey> increased_;
  std::vector<PairKey> scratch_old_;
  std::vector<PairKey> scratch_new_;
};

}  // namespace

void VocabConfig::validate() const {
  if (alphabet_cap < 1) throw ConfigError("alphabet_cap must be >= 1");
  if (vocab_size <= special_tokens.size()) {
    throw ConfigError("vocab_size must exceed the number of special tokens");
  }
  std::set<std::string> seen;
  for (const auto& t : special_tokens) {
    if (t.empty()) throw ConfigError("special tokens must be non-empty");
    if (!seen.insert(t).second) throw ConfigError("duplicate special token " + t);
  }
  if (!seen.contains(std::string(kUnkToken))) {
    throw ConfigError("special tokens must include " + std::string(kUnkToken));
  }
}

void add_line_counts(std::string_view line, const VocabConfig& config, WordFreqs& freqs) {
  std::vector<std::string> words;
  normalized_words(line, config.normalization(), words);
  for (std::string& w : words) ++freqs[std::move(w)];
}

WordFreqs count_words(ByteSource& corpus, const VocabConfig& config, std::size_t workers) {
  const WordNormalization norm = config.normalization();
  LineReader reader(corpus);
  Counter total;
  std::vector<std::string> scratch;
  std::string_view line;

  if (workers <= 1) {
    while (reader.next(line)) count_line(line, norm, scratch, total);
  } else {
    constexpr std::size_t kBatchLines = 8192;
    std::vector<std::vector<std::string>> batches(workers);
    std::vector<Counter> partial(workers);
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
            std::vector<std::string> local_scratch;
            for (const auto& l : batches[b]) count_line(l, norm, local_scratch, partial[b]);
          });
        }
      }
      for (std::size_t b = 0; b < filled; ++b) {
        for (auto& [w, c] : partial[b]) total[w] += c;
        partial[b].clear();
      }
    }
  }

  WordFreqs out;
  for (auto& [w, c] : total) out.emplace(w, c);
  return out;
}

std::vector<char32_t> build_alphabet(const WordFreqs& word_freqs, std::size_t cap) {
  std::unordered_map<char32_t, std::uint64_t> counts;
  for (const auto& [word, freq] : word_freqs) {
    for (char32_t c : unicode::decode_lossy(word)) counts[c] += freq;
  }
  std::vector<std::pair<char32_t, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);
  std::vector<char32_t> alphabet;
  alphabet.reserve(ranked.size());
  for (const auto& [c, n] : ranked) alphabet.push_back(c);
  std::sort(alphabet.begin(), alphabet.end());
  return alphabet;
}

Vocabulary train_bpe(const WordFreqs& word_freqs, const VocabConfig& config, TrainStats* stats,
                     const TrainProgress& progress) {
  config.validate();
  if (word_freqs.empty()) throw ConfigError("cannot train a vocabulary on an empty corpus");

  const std::vector<char32_t> alphabet = build_alphabet(word_freqs, config.alphabet_cap);
  auto in_alphabet = [&](char32_t c) {
    return std::binary_search(alphabet.begin(), alphabet.end(), c);
  };

  // Base pieces: each alphabet character in the positions it was seen in.
  std::set<char32_t> initial_forms;
  std::set<char32_t> continuation_forms;
  std::vector<std::pair<std::u32string, std::uint64_t>> trainable;
  std::size_t excluded = 0;
  for (const auto& [word, freq] : word_freqs) {
    std::u32string chars = unicode::decode_lossy(word);
    bool all_in = true;
    for (std::size_t k = 0; k < chars.size(); ++k) {
      if (in_alphabet(chars[k])) {
        (k == 0 ? initial_forms : continuation_forms).insert(chars[k]);
      } else {
        all_in = false;
      }
    }
    if (all_in) {
      trainable.emplace_back(std::move(chars), freq);
    } else {
      ++excluded;
    }
  }

  std::vector<std::string> pieces = config.special_tokens;
  for (char32_t c : alphabet) {
    std::string s;
    unicode::append_utf8(s, c);
    if (initial_forms.contains(c)) pieces.push_back(s);
    if (continuation_forms.contains(c)) pieces.push_back(std::string(kContinuationPrefix) + s);
  }
  if (config.vocab_size <= config.special_tokens.size() + alphabet.size() ||
      config.vocab_size < pieces.size()) {
    throw ConfigError("vocab_size " + std::to_string(config.vocab_size) + " cannot hold " +
                      std::to_string(config.special_tokens.size()) + " special tokens plus " +
                      std::to_string(alphabet.size()) + " alphabet characters (" +
                      std::to_string(pieces.size() - config.special_tokens.size()) +
                      " base pieces)");
  }

  BpeState state(pieces, config.min_pair_frequency);
  for (const auto& [chars, freq] : trainable) {
    if (chars.size() < 2) continue;
    std::vector<TokenId> symbols;
    symbols.reserve(chars.size());
    for (std::size_t k = 0; k < chars.size(); ++k) {
      std::string s = k == 0 ? std::string() : std::string(kContinuationPrefix);
      unicode::append_utf8(s, chars[k]);
      symbols.push_back(state.id_of(s));
    }
    state.add_word(std::move(symbols), freq);
  }
  state.seed_heap();

  std::vector<Merge> merges;
  if (stats != nullptr) {
    stats->words_total = word_freqs.size();
    stats->words_excluded = excluded;
    stats->merge_frequencies.clear();
  }
  state.run(config.vocab_size, merges, stats, progress);

  return Vocabulary(state.take_pieces(), config.special_tokens, alphabet, std::move(merges),
                    config.normalization());
}

void save_word_freqs(const WordFreqs& freqs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [word, count] : freqs) out << word << '\t' << count << '\n';
  if (!out.flush()) throw IoError("write failed on " + path.string());
}

WordFreqs load_word_freqs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  WordFreqs freqs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected word<TAB>count", line_no);
    std::uint64_t count = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, count);
    if (ec != std::errc() || ptr != last || first == last) {
      throw ParseError("invalid count", line_no);
    }
    if (!freqs.emplace(line.substr(0, tab), count).second) {
      throw ParseError("duplicate word", line_no);
    }
  }
  return freqs;
}

}  // namespace cforge
