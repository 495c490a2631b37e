#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cforge/vocab_trainer.hpp"

namespace testing {

// Up to `max_words` distinct random words over `letters`, with skewed
// frequencies so merges have clear winners and plenty of ties.
inline cforge::WordFreqs random_toy_corpus(std::uint64_t seed, std::size_t max_words = 50,
                                           const std::vector<std::string>& letters = {
                                               "a", "b", "c", "d", "e", "ă", "ș"}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> n_words(1, max_words);
  std::uniform_int_distribution<std::size_t> len(1, 9);
  std::uniform_int_distribution<std::size_t> alpha_size(2, letters.size());
  const std::size_t k = alpha_size(rng);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::geometric_distribution<int> freq(0.15);

  cforge::WordFreqs out;
  const std::size_t target = n_words(rng);
  for (std::size_t attempt = 0; out.size() < target && attempt < target * 20; ++attempt) {
    std::string w;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) w += letters[pick(rng)];
    out[w] += static_cast<std::uint64_t>(freq(rng)) + 1;
  }
  return out;
}

}  // namespace testing
