#include <benchmark/benchmark.h>

#include <sstream>
#include <string>
#include <vector>

#include "cforge/byte_source.hpp"
#include "cforge/cleaner.hpp"
#include "cforge/tokenizer.hpp"
#include "cforge/vocab_trainer.hpp"
#include "fuzz.hpp"
#include "toy_corpus.hpp"

using namespace cforge;

namespace {

std::vector<std::string> prose(std::size_t n) {
  testing::LineFuzzer fuzz(1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fuzz.prose_line());
  return out;
}

std::string joined(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

void BM_CleanLine(benchmark::State& state) {
  const auto lines = prose(1024);
  const CleanConfig cfg;
  std::size_t i = 0, bytes = 0;
  for (auto _ : state) {
    const auto& l = lines[i++ % lines.size()];
    benchmark::DoNotOptimize(clean_line(l, cfg));
    bytes += l.size();
  }
  state.SetBytesProcessed(static_cast<int64_t>(bytes));
}
BENCHMARK(BM_CleanLine);

void BM_CleanStream(benchmark::State& state) {
  const std::string text = joined(prose(20000));
  const CleanConfig cfg;
  for (auto _ : state) {
    StringSource src(text);
    std::ostringstream out;
    benchmark::DoNotOptimize(clean_stream(src, out, cfg));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_CleanStream)->Unit(benchmark::kMillisecond);

void BM_CountWords(benchmark::State& state) {
  const std::string text = joined(prose(20000));
  const VocabConfig cfg;
  for (auto _ : state) {
    StringSource src(text);
    benchmark::DoNotOptimize(count_words(src, cfg));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_CountWords)->Unit(benchmark::kMillisecond);

void BM_TrainBpe(benchmark::State& state) {
  WordFreqs freqs;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (const auto& [w, f] : testing::random_toy_corpus(seed, 50)) freqs[w] += f;
  }
  VocabConfig cfg;
  cfg.vocab_size = static_cast<std::size_t>(state.range(0));
  cfg.min_pair_frequency = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_bpe(freqs, cfg));
}
BENCHMARK(BM_TrainBpe)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TokenizeLine(benchmark::State& state) {
  const auto lines = prose(2000);
  const std::string text = joined(lines);
  StringSource src(text);
  VocabConfig cfg;
  cfg.vocab_size = 500;
  const Vocabulary v = train_bpe(count_words(src, cfg), cfg);
  WordPieceTokenizer tok(v);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tok.tokenize_line(lines[i++ % lines.size()]));
}
BENCHMARK(BM_TokenizeLine);

}  // namespace
BENCHMARK_MAIN();
