#include "cforge/stats_sampler.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cforge/error.hpp"
#include "cforge/rng.hpp"
#include "json.hpp"

namespace cforge {
namespace {

bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::uint64_t count_words_in(std::string_view line) {
  std::uint64_t words = 0;
  bool in_word = false;
  for (char c : line) {
    if (ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::uint64_t count_lines(const std::filesystem::path& path) {
  auto source = open_input(path);
  LineReader reader(*source);
  std::string_view line;
  std::uint64_t lines = 0;
  while (reader.next(line)) ++lines;
  return lines;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string CorpusStats::to_json() const {
  auto row = [](const CorpusCounts& c) {
    nlohmann::ordered_json j;
    j["lines"] = c.lines;
    j["words"] = c.words;
    j["bytes"] = c.bytes;
    return j;
  };
  nlohmann::ordered_json j;
  j["corpora"] = nlohmann::ordered_json::array();
  for (const auto& [name, counts] : per_corpus) {
    nlohmann::ordered_json r;
    r["name"] = name;
    r.update(row(counts));
    j["corpora"].push_back(r);
  }
  j["total"] = row(total);
  return j.dump();
}

CorpusCounts count_corpus(ByteSource& source) {
  LineReader reader(source);
  CorpusCounts counts;
  std::string_view line;
  while (reader.next(line)) {
    ++counts.lines;
    counts.words += count_words_in(line);
  }
  counts.bytes = reader.bytes_consumed();
  return counts;
}

CorpusStats corpus_stats(const std::vector<NamedCorpus>& corpora) {
  CorpusStats stats;
  for (const NamedCorpus& corpus : corpora) {
    auto source = open_input(corpus.path);
    const CorpusCounts counts = count_corpus(*source);
    stats.per_corpus[corpus.name] += counts;
    stats.total += counts;
  }
  return stats;
}

std::vector<std::uint64_t> allocate_quotas(const std::vector<std::uint64_t>& weights,
                                           std::uint64_t n) {
  __extension__ typedef unsigned __int128 u128;
  const u128 total = std::accumulate(weights.begin(), weights.end(), u128{0});
  if (n > total) {
    throw std::invalid_argument("cannot draw " + std::to_string(n) + " lines from a total of " +
                                std::to_string(static_cast<std::uint64_t>(total)));
  }
  std::vector<std::uint64_t> quotas(weights.size(), 0);
  if (n == 0) return quotas;

  std::vector<u128> remainders(weights.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const u128 scaled = u128{n} * weights[i];
    quotas[i] = static_cast<std::uint64_t>(scaled / total);
    remainders[i] = scaled % total;
    assigned += quotas[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k) {
    ++quotas[order[k]];
    ++assigned;
  }
  return quotas;
}

std::string_view to_string(SampleWeight weight) {
  switch (weight) {
    case SampleWeight::kLines: return "lines";
    case SampleWeight::kWords: return "words";
    case SampleWeight::kBytes: return "bytes";
  }
  return "lines";
}

SampleWeight parse_sample_weight(std::string_view text) {
  if (text == "lines") return SampleWeight::kLines;
  if (text == "words") return SampleWeight::kWords;
  if (text == "bytes") return SampleWeight::kBytes;
  throw std::invalid_argument("sample weight must be lines, words or bytes, not '" +
                              std::string(text) + "'");
}

DevSample sample_dev(const std::vector<NamedCorpus>& corpora, const DevSampleOptions& options) {
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (corpora[i].name == corpora[j].name) {
        throw std::invalid_argument("duplicate corpus name '" + corpora[i].name + "'");
      }
    }
  }
  std::vector<std::uint64_t> weights;
  weights.reserve(corpora.size());
  for (const NamedCorpus& corpus : corpora) {
    if (options.weight == SampleWeight::kLines) {
      weights.push_back(count_lines(corpus.path));
      continue;
    }
    auto source = open_input(corpus.path);
    const CorpusCounts counts = count_corpus(*source);
    weights.push_back(options.weight == SampleWeight::kWords ? counts.words : counts.bytes);
  }
  const std::vector<std::uint64_t> quotas = allocate_quotas(weights, options.n);

  DevSample result;
  std::ofstream dev = open_output(options.dev_out);
  std::vector<std::vector<std::uint64_t>> sampled(corpora.size());

  for (std::size_t c = 0; c < corpora.size(); ++c) {
    const NamedCorpus& corpus = corpora[c];
    const std::uint64_t k = quotas[c];
    result.quotas[corpus.name] += k;
    if (k == 0) continue;

    // Algorithm R.
    Rng rng(mix_seed(options.seed, fnv1a64(corpus.name)));
    std::vector<std::pair<std::uint64_t, std::string>> reservoir;
    reservoir.reserve(k);
    auto source = open_input(corpus.path);
    LineReader reader(*source);
    std::string_view line;
    for (std::uint64_t index = 0; reader.next(line); ++index) {
      if (index < k) {
        reservoir.emplace_back(index, std::string(line));
      } else {
        const std::uint64_t j = rng.uniform(index + 1);
        if (j < k) reservoir[j] = {index, std::string(line)};
      }
    }
    if (reservoir.size() < k) {
      throw std::invalid_argument("corpus '" + corpus.name + "' has fewer lines than its quota of " +
                                  std::to_string(k));
    }
    std::sort(reservoir.begin(), reservoir.end());
    for (const auto& [index, text] : reservoir) {
      dev << text << '\n';
      sampled[c].push_back(index);
      result.manifest.push_back({corpus.name, index});
    }
  }
  if (!dev.flush()) throw IoError("write failed on " + options.dev_out.string());

  std::ofstream manifest = open_output(options.manifest_out);
  for (const SampleEntry& e : result.manifest) manifest << e.corpus << '\t' << e.line_index << '\n';
  if (!manifest.flush()) throw IoError("write failed on " + options.manifest_out.string());

  if (options.train_out) {
    std::ofstream train = open_output(*options.train_out);
    for (std::size_t c = 0; c < corpora.size(); ++c) {
      auto source = open_input(corpora[c].path);
      LineReader reader(*source);
      std::string_view line;
      auto skip = sampled[c].begin();
      for (std::uint64_t index = 0; reader.next(line); ++index) {
        if (skip != sampled[c].end() && *skip == index) {
          ++skip;
          continue;
        }
        train << line << '\n';
      }
    }
    if (!train.flush()) throw IoError("write failed on " + options.train_out->string());
  }
  return result;
}

std::vector<SampleEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SampleEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("expected corpus<TAB>line_index", line_no);
    std::uint64_t index = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec != std::errc() || ptr != last || first == last) {
      throw ParseError("invalid line index", line_no);
    }
    entries.push_back({line.substr(0, tab), index});
  }
  return entries;
}

}  // namespace cforge
