#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/byte_source.hpp"
#include "cforge/rng.hpp"
#include "cforge/tokenizer.hpp"
#include "cforge/vocabulary.hpp"

namespace cforge {

/// Tails shorter than this many pieces are dropped at end of input.
inline constexpr std::size_t kMinTailPieces = 5;

struct PretrainConfig {
  std::size_t max_seq_len = 128;
  double mask_rate = 0.15;
  double mask_token_rate = 0.8;
  double random_token_rate = 0.1;
  double keep_rate = 0.1;
  std::uint64_t seed = 12345;
  double short_seq_prob = 0.1;
  /// Number of differently-masked copies emitted per packed sequence.
  std::size_t dupe_factor = 1;

  void validate() const;
};

struct TrainingInstance {
  std::vector<TokenId> token_ids;  // padded to max_seq_len
  std::size_t attention_len = 0;
  std::vector<std::size_t> masked_positions;
  std::vector<TokenId> masked_labels;
  /// Set when a line longer than max_seq_len - 2 pieces was split.
  bool split_line = false;

  friend bool operator==(const TrainingInstance&, const TrainingInstance&) = default;
};

/// Ids an instance layout depends on, resolved from a vocabulary.
struct InstanceLayout {
  std::size_t max_seq_len = 128;
  double mask_rate = 0.15;
  TokenId pad = 0;
  TokenId cls = 0;
  TokenId sep = 0;
  TokenId mask = 0;
  TokenId unk = 0;
  /// Random replacements are drawn from [first_regular, vocab_size).
  TokenId first_regular = 0;
  std::size_t vocab_size = 0;

  /// Throws ConfigError if a required special token is missing.
  static InstanceLayout from(const Vocabulary& vocab, const PretrainConfig& config);
  /// Reads the metadata sidecar written next to instance shards.
  static InstanceLayout load(const std::filesystem::path& metadata_path);
};

/// round(mask_rate * maskable_len), at least 1. The rate is resolved to six
/// decimal places and rounded half up in integer arithmetic.
std::size_t masked_count(std::size_t maskable_len, double mask_rate);

using InstanceSink = std::function<void(TrainingInstance)>;

/// Greedily concatenates tokenized lines into [CLS] ... [SEP] sequences of at
/// most max_seq_len. Lines never straddle instances unless a single line is
/// longer than max_seq_len - 2 pieces.
class SequencePacker {
 public:
  SequencePacker(const Vocabulary& vocab, const PretrainConfig& config);

  void add_line(std::string_view line, const InstanceSink& sink);
  void add_ids(std::span<const TokenId> ids, const InstanceSink& sink);
  void finish(const InstanceSink& sink);

 private:
  void emit(const InstanceSink& sink);
  std::size_t next_target();

  WordPieceTokenizer tokenizer_;
  InstanceLayout layout_;
  PretrainConfig config_;
  Rng rng_;
  std::vector<TokenId> buffer_;
  std::vector<TokenId> line_ids_;
  std::size_t target_;
  bool buffer_split_ = false;
};

std::vector<TrainingInstance> pack_sequences(ByteSource& corpus, const Vocabulary& vocab,
                                             const PretrainConfig& config);

/// Selects masked_count(attention_len - 2) distinct content positions and
/// applies the [MASK] / random / keep replacement. Deterministic in
/// (config.seed, ordinal). Throws std::invalid_argument if attention_len < 3.
TrainingInstance apply_mlm_mask(TrainingInstance instance, const PretrainConfig& config,
                                const InstanceLayout& layout, std::uint64_t ordinal);

/// Writes the labels back into the masked positions.
TrainingInstance unmask(const TrainingInstance& instance);

/// Human-readable violations of the layout invariants; empty when valid.
std::vector<std::string> check_instance(const TrainingInstance& instance,
                                        const InstanceLayout& layout);

std::string instance_to_json(const TrainingInstance& instance);
TrainingInstance instance_from_json(std::string_view line);

/// Newline-delimited JSON, keys ids, len, masked_positions, masked_labels
/// (plus "split" on split lines). Returns the number written; throws IoError
/// on failure.
std::size_t write_instances(std::span<const TrainingInstance> instances,
                            const std::filesystem::path& path);
std::vector<TrainingInstance> read_instances(const std::filesystem::path& path);

/// Shard file name: instances-{seqlen}-{shard:05}.jsonl
std::string shard_file_name(std::size_t max_seq_len, std::size_t shard);
std::string metadata_file_name(std::size_t max_seq_len);

class ShardedInstanceWriter {
 public:
  ShardedInstanceWriter(std::filesystem::path dir, std::size_t max_seq_len,
                        std::size_t instances_per_shard);

  void write(const TrainingInstance& instance);
  /// Flushes and closes the open shard; returns every shard path written.
  std::vector<std::filesystem::path> close();
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path dir_;
  std::size_t max_seq_len_;
  std::size_t per_shard_;
  std::ofstream out_;
  std::size_t in_shard_ = 0;
  std::size_t count_ = 0;
  std::vector<std::filesystem::path> shards_;
};

struct PrepSummary {
  std::size_t packed = 0;
  std::size_t written = 0;
  std::vector<std::filesystem::path> shards;
  std::filesystem::path metadata;
};

/// pack -> mask -> shard writer, streaming. Also writes the metadata sidecar.
PrepSummary prepare_instances(ByteSource& corpus, const Vocabulary& vocab,
                              const PretrainConfig& config, const std::filesystem::path& out_dir,
                              std::size_t instances_per_shard = 100000);

}  // namespace cforge
