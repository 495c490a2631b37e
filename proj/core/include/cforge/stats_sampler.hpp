#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/byte_source.hpp"

namespace cforge {

struct NamedCorpus {
  std::string name;
  std::filesystem::path path;
};

struct CorpusCounts {
  std::uint64_t lines = 0;
  std::uint64_t words = 0;
  std::uint64_t bytes = 0;

  CorpusCounts& operator+=(const CorpusCounts& other) {
    lines += other.lines;
    words += other.words;
    bytes += other.bytes;
    return *this;
  }
  friend bool operator==(const CorpusCounts&, const CorpusCounts&) = default;
};

struct CorpusStats {
  std::map<std::string, CorpusCounts> per_corpus;
  CorpusCounts total;

  /// {"corpora": [{"name", "lines", "words", "bytes"}...], "total": {...}}
  std::string to_json() const;
};

/// Lines are records, words are whitespace-delimited tokens, bytes is the
/// full byte length of the (decompressed) stream.
CorpusCounts count_corpus(ByteSource& source);
CorpusStats corpus_stats(const std::vector<NamedCorpus>& corpora);

/// Largest-remainder apportionment of `n` over `weights`: floors first, then
/// one extra unit to the largest remainders (ties to the earlier entry).
/// Throws std::invalid_argument when n exceeds the total weight.
std::vector<std::uint64_t> allocate_quotas(const std::vector<std::uint64_t>& weights,
                                           std::uint64_t n);

struct SampleEntry {
  std::string corpus;
  std::uint64_t line_index = 0;  // 0-based record index within its corpus

  friend auto operator<=>(const SampleEntry&, const SampleEntry&) = default;
};

/// What the dev sample is proportional to.
enum class SampleWeight { kLines, kWords, kBytes };

std::string_view to_string(SampleWeight weight);
/// Throws std::invalid_argument for anything but lines/words/bytes.
SampleWeight parse_sample_weight(std::string_view text);

struct DevSampleOptions {
  std::uint64_t n = 5000;
  SampleWeight weight = SampleWeight::kLines;
  std::uint64_t seed = 0;
  std::filesystem::path dev_out;
  std::filesystem::path manifest_out;
  /// When set, every non-sampled line is re-emitted here (corpus order).
  std::optional<std::filesystem::path> train_out;
};

struct DevSample {
  std::map<std::string, std::uint64_t> quotas;
  std::vector<SampleEntry> manifest;  // sorted by (corpus order, line index)
};

/// Proportional dev sample (by lines unless options.weight says otherwise)
/// with per-corpus reservoir sampling. Corpora are processed in the order
/// given; the result depends only on the inputs and the seed. Throws
/// std::invalid_argument when a corpus has fewer lines than its quota.
DevSample sample_dev(const std::vector<NamedCorpus>& corpora, const DevSampleOptions& options);

/// Reads a manifest TSV (corpus \t line_index).
std::vector<SampleEntry> read_manifest(const std::filesystem::path& path);

}  // namespace cforge
