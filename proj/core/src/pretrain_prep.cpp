#include "cforge/pretrain_prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "cforge/error.hpp"
#include "json.hpp"

namespace cforge {
namespace {

constexpr std::uint64_t kPackStream = 0x7061636B;  // "pack"
constexpr std::uint64_t kMaskStream = 0x6D61736B;  // "mask"

void check_fraction(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must be in [0,1]");
  }
}

TokenId require_special(const Vocabulary& vocab, std::string_view token) {
  const auto id = vocab.special_id(token);
  if (!id) throw ConfigError("vocabulary lacks special token " + std::string(token));
  return *id;
}

}  // namespace

void PretrainConfig::validate() const {
  if (max_seq_len < 3) throw ConfigError("max_seq_len must be >= 3");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask_rate must be in (0,1)");
  check_fraction(mask_token_rate, "mask_token_rate");
  check_fraction(random_token_rate, "random_token_rate");
  check_fraction(keep_rate, "keep_rate");
  check_fraction(short_seq_prob, "short_seq_prob");
  if (std::abs(mask_token_rate + random_token_rate + keep_rate - 1.0) > 1e-9) {
    throw ConfigError("mask_token_rate + random_token_rate + keep_rate must equal 1");
  }
  if (dupe_factor < 1) throw ConfigError("dupe_factor must be >= 1");
}

InstanceLayout InstanceLayout::from(const Vocabulary& vocab, const PretrainConfig& config) {
  InstanceLayout layout;
  layout.max_seq_len = config.max_seq_len;
  layout.mask_rate = config.mask_rate;
  layout.pad = require_special(vocab, "[PAD]");
  layout.cls = require_special(vocab, "[CLS]");
  layout.sep = require_special(vocab, "[SEP]");
  layout.mask = require_special(vocab, "[MASK]");
  layout.unk = vocab.unk_id();
  layout.first_regular = static_cast<TokenId>(vocab.special_tokens().size());
  layout.vocab_size = vocab.size();
  if (layout.vocab_size <= static_cast<std::size_t>(layout.first_regular)) {
    throw ConfigError("vocabulary has no regular pieces to draw random replacements from");
  }
  return layout;
}

InstanceLayout InstanceLayout::load(const std::filesystem::path& metadata_path) {
  std::ifstream in(metadata_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + metadata_path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    InstanceLayout layout;
    layout.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    layout.mask_rate = j.at("mask_rate").get<double>();
    layout.vocab_size = j.at("vocab_size").get<std::size_t>();
    layout.first_regular = j.at("first_regular_id").get<TokenId>();
    const auto& ids = j.at("special_ids");
    layout.pad = ids.at("[PAD]").get<TokenId>();
    layout.cls = ids.at("[CLS]").get<TokenId>();
    layout.sep = ids.at("[SEP]").get<TokenId>();
    layout.mask = ids.at("[MASK]").get<TokenId>();
    layout.unk = ids.at("[UNK]").get<TokenId>();
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(metadata_path.string() + ": " + e.what());
  }
}

std::size_t masked_count(std::size_t maskable_len, double mask_rate) {
  constexpr std::uint64_t kScale = 1000000;
  const auto rate = static_cast<std::uint64_t>(std::llround(mask_rate * kScale));
  const std::uint64_t scaled = rate * maskable_len;
  const std::uint64_t rounded = (2 * scaled + kScale) / (2 * kScale);
  return std::min<std::size_t>(maskable_len, std::max<std::uint64_t>(1, rounded));
}

SequencePacker::SequencePacker(const Vocabulary& vocab, const PretrainConfig& config)
    : tokenizer_(vocab),
      layout_(InstanceLayout::from(vocab, config)),
      config_(config),
      rng_(mix_seed(config.seed, kPackStream)) {
  config_.validate();
  target_ = next_target();
}

std::size_t SequencePacker::next_target() {
  const std::size_t capacity = config_.max_seq_len - 2;
  const double draw = rng_.unit();
  if (capacity > 2 && draw < config_.short_seq_prob) {
    return 2 + static_cast<std::size_t>(rng_.uniform(capacity - 1));
  }
  return capacity;
}

void SequencePacker::emit(const InstanceSink& sink) {
  TrainingInstance instance;
  instance.token_ids.reserve(config_.max_seq_len);
  instance.token_ids.push_back(layout_.cls);
  instance.token_ids.insert(instance.token_ids.end(), buffer_.begin(), buffer_.end());
  instance.token_ids.push_back(layout_.sep);
  instance.attention_len = instance.token_ids.size();
  instance.token_ids.resize(config_.max_seq_len, layout_.pad);
  instance.split_line = buffer_split_;
  buffer_.clear();
  buffer_split_ = false;
  target_ = next_target();
  sink(std::move(instance));
}

void SequencePacker::add_line(std::string_view line, const InstanceSink& sink) {
  line_ids_.clear();
  tokenizer_.line_ids(line, line_ids_);
  add_ids(line_ids_, sink);
}

void SequencePacker::add_ids(std::span<const TokenId> ids, const InstanceSink& sink) {
  if (ids.empty()) return;
  const std::size_t capacity = config_.max_seq_len - 2;
  if (ids.size() > capacity) {
    if (!buffer_.empty()) emit(sink);
    std::size_t offset = 0;
    while (ids.size() - offset > capacity) {
      buffer_.assign(ids.begin() + static_cast<std::ptrdiff_t>(offset),
                     ids.begin() + static_cast<std::ptrdiff_t>(offset + capacity));
      buffer_split_ = true;
      emit(sink);
      offset += capacity;
    }
    buffer_.assign(ids.begin() + static_cast<std::ptrdiff_t>(offset), ids.end());
    buffer_split_ = true;
    return;
  }
  if (!buffer_.empty() && buffer_.size() + ids.size() > target_) emit(sink);
  buffer_.insert(buffer_.end(), ids.begin(), ids.end());
}

void SequencePacker::finish(const InstanceSink& sink) {
  if (buffer_.size() >= kMinTailPieces) {
    emit(sink);
  } else {
    buffer_.clear();
    buffer_split_ = false;
  }
}

std::vector<TrainingInstance> pack_sequences(ByteSource& corpus, const Vocabulary& vocab,
                                             const PretrainConfig& config) {
  std::vector<TrainingInstance> out;
  const InstanceSink sink = [&out](TrainingInstance instance) { out.push_back(std::move(instance)); };
  SequencePacker packer(vocab, config);
  LineReader reader(corpus);
  std::string_view line;
  while (reader.next(line)) packer.add_line(line, sink);
  packer.finish(sink);
  return out;
}

TrainingInstance apply_mlm_mask(TrainingInstance instance, const PretrainConfig& config,
                                const InstanceLayout& layout, std::uint64_t ordinal) {
  if (instance.attention_len < 3) {
    throw std::invalid_argument("apply_mlm_mask: attention_len < 3 leaves nothing to mask");
  }
  const std::size_t maskable = instance.attention_len - 2;
  const std::size_t count = masked_count(maskable, config.mask_rate);
  Rng rng(mix_seed(config.seed ^ kMaskStream, ordinal));

  // Partial Fisher-Yates over content positions 1..maskable.
  std::vector<std::size_t> positions(maskable);
  std::iota(positions.begin(), positions.end(), std::size_t{1});
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(maskable - i));
    std::swap(positions[i], positions[j]);
  }
  positions.resize(count);
  std::sort(positions.begin(), positions.end());

  const auto random_span = static_cast<std::uint64_t>(layout.vocab_size) -
                           static_cast<std::uint64_t>(layout.first_regular);
  instance.masked_positions = positions;
  instance.masked_labels.clear();
  for (std::size_t pos : positions) {
    TokenId& slot = instance.token_ids[pos];
    instance.masked_labels.push_back(slot);
    const double r = rng.unit();
    if (r < config.mask_token_rate) {
      slot = layout.mask;
    } else if (r < config.mask_token_rate + config.random_token_rate) {
      slot = layout.first_regular + static_cast<TokenId>(rng.uniform(random_span));
    }
  }
  return instance;
}

TrainingInstance unmask(const TrainingInstance& instance) {
  TrainingInstance out = instance;
  for (std::size_t k = 0; k < out.masked_positions.size(); ++k) {
    out.token_ids.at(out.masked_positions[k]) = out.masked_labels.at(k);
  }
  out.masked_positions.clear();
  out.masked_labels.clear();
  return out;
}

std::vector<std::string> check_instance(const TrainingInstance& instance,
                                        const InstanceLayout& layout) {
  std::vector<std::string> problems;
  const auto& ids = instance.token_ids;
  const std::size_t len = instance.attention_len;
  if (ids.size() != layout.max_seq_len) {
    problems.push_back("token_ids has length " + std::to_string(ids.size()) + ", expected " +
                       std::to_string(layout.max_seq_len));
  }
  if (len < 3 || len > ids.size()) {
    problems.push_back("attention_len " + std::to_string(len) + " out of range");
    return problems;
  }
  if (ids[0] != layout.cls) problems.push_back("first token is not [CLS]");
  if (ids[len - 1] != layout.sep) problems.push_back("last attended token is not [SEP]");
  for (std::size_t i = len; i < ids.size(); ++i) {
    if (ids[i] != layout.pad) {
      problems.push_back("position " + std::to_string(i) + " past attention_len is not [PAD]");
      break;
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= layout.vocab_size) {
      problems.push_back("id out of vocabulary range at position " + std::to_string(i));
      break;
    }
  }
  for (std::size_t i = 1; i + 1 < len; ++i) {
    if (ids[i] == layout.cls || ids[i] == layout.sep || ids[i] == layout.pad) {
      problems.push_back("structural special token inside content at " + std::to_string(i));
      break;
    }
  }

  const auto& pos = instance.masked_positions;
  const auto& labels = instance.masked_labels;
  if (pos.size() != labels.size()) problems.push_back("masked positions/labels size mismatch");
  const std::size_t expected = masked_count(len - 2, layout.mask_rate);
  if (pos.size() != expected) {
    problems.push_back("masked " + std::to_string(pos.size()) + " positions, expected " +
                       std::to_string(expected));
  }
  for (std::size_t k = 0; k < pos.size(); ++k) {
    if (pos[k] < 1 || pos[k] + 1 >= len) {
      problems.push_back("masked position " + std::to_string(pos[k]) + " outside content");
    }
    if (k > 0 && pos[k] <= pos[k - 1]) problems.push_back("masked positions not increasing");
  }
  for (TokenId label : labels) {
    if (label == layout.cls || label == layout.sep || label == layout.pad ||
        label == layout.mask || label < 0 || static_cast<std::size_t>(label) >= layout.vocab_size) {
      problems.push_back("invalid masked label " + std::to_string(label));
      break;
    }
  }
  return problems;
}

std::string instance_to_json(const TrainingInstance& instance) {
  nlohmann::ordered_json j;
  j["ids"] = instance.token_ids;
  j["len"] = instance.attention_len;
  j["masked_positions"] = instance.masked_positions;
  j["masked_labels"] = instance.masked_labels;
  if (instance.split_line) j["split"] = true;
  return j.dump();
}

TrainingInstance instance_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TrainingInstance instance;
    instance.token_ids = j.at("ids").get<std::vector<TokenId>>();
    instance.attention_len = j.at("len").get<std::size_t>();
    instance.masked_positions = j.at("masked_positions").get<std::vector<std::size_t>>();
    instance.masked_labels = j.at("masked_labels").get<std::vector<TokenId>>();
    instance.split_line = j.value("split", false);
    return instance;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
}

std::size_t write_instances(std::span<const TrainingInstance> instances,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::size_t written = 0;
  for (const TrainingInstance& instance : instances) {
    out << instance_to_json(instance) << '\n';
    if (!out) throw IoError("write failed on " + path.string() + " after " +
                            std::to_string(written) + " instances");
    ++written;
  }
  if (!out.flush()) throw IoError("flush failed on " + path.string());
  return written;
}

std::vector<TrainingInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TrainingInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      out.push_back(instance_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::string shard_file_name(std::size_t max_seq_len, std::size_t shard) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "instances-%zu-%05zu.jsonl", max_seq_len, shard);
  return buf;
}

std::string metadata_file_name(std::size_t max_seq_len) {
  return "instances-" + std::to_string(max_seq_len) + ".meta.json";
}

ShardedInstanceWriter::ShardedInstanceWriter(std::filesystem::path dir, std::size_t max_seq_len,
                                             std::size_t instances_per_shard)
    : dir_(std::move(dir)),
      max_seq_len_(max_seq_len),
      per_shard_(std::max<std::size_t>(1, instances_per_shard)) {
  std::filesystem::create_directories(dir_);
}

void ShardedInstanceWriter::write(const TrainingInstance& instance) {
  if (!out_.is_open() || in_shard_ == per_shard_) {
    if (out_.is_open()) {
      out_.close();
      if (!out_) throw IoError("close failed on " + shards_.back().string());
    }
    shards_.push_back(dir_ / shard_file_name(max_seq_len_, shards_.size()));
    out_.open(shards_.back(), std::ios::binary);
    if (!out_) throw IoError("cannot write " + shards_.back().string());
    in_shard_ = 0;
  }
  out_ << instance_to_json(instance) << '\n';
  if (!out_) {
    throw IoError("write failed on " + shards_.back().string() + " after " +
                  std::to_string(count_) + " instances");
  }
  ++in_shard_;
  ++count_;
}

std::vector<std::filesystem::path> ShardedInstanceWriter::close() {
  if (out_.is_open()) {
    out_.close();
    if (!out_) throw IoError("close failed on " + shards_.back().string());
  }
  return shards_;
}

PrepSummary prepare_instances(ByteSource& corpus, const Vocabulary& vocab,
                              const PretrainConfig& config, const std::filesystem::path& out_dir,
                              std::size_t instances_per_shard) {
  config.validate();
  const InstanceLayout layout = InstanceLayout::from(vocab, config);
  ShardedInstanceWriter writer(out_dir, config.max_seq_len, instances_per_shard);
  PrepSummary summary;
  std::uint64_t ordinal = 0;
  const InstanceSink sink = [&](TrainingInstance instance) {
    ++summary.packed;
    for (std::size_t copy = 0; copy < config.dupe_factor; ++copy) {
      writer.write(apply_mlm_mask(instance, config, layout, ordinal++));
    }
  };

  SequencePacker packer(vocab, config);
  LineReader reader(corpus);
  std::string_view line;
  while (reader.next(line)) packer.add_line(line, sink);
  packer.finish(sink);

  summary.shards = writer.close();
  summary.written = writer.count();

  nlohmann::ordered_json meta;
  meta["max_seq_len"] = config.max_seq_len;
  meta["mask_rate"] = config.mask_rate;
  meta["mask_token_rate"] = config.mask_token_rate;
  meta["random_token_rate"] = config.random_token_rate;
  meta["keep_rate"] = config.keep_rate;
  meta["short_seq_prob"] = config.short_seq_prob;
  meta["dupe_factor"] = config.dupe_factor;
  meta["seed"] = config.seed;
  meta["vocab_size"] = layout.vocab_size;
  meta["first_regular_id"] = layout.first_regular;
  meta["special_ids"] = {{"[PAD]", layout.pad}, {"[UNK]", layout.unk}, {"[CLS]", layout.cls},
                         {"[SEP]", layout.sep}, {"[MASK]", layout.mask}};
  meta["instances"] = summary.written;
  auto& shards = meta["shards"] = nlohmann::ordered_json::array();
  for (const auto& s : summary.shards) shards.push_back(s.filename().string());

  summary.metadata = out_dir / metadata_file_name(config.max_seq_len);
  std::ofstream out(summary.metadata, std::ios::binary);
  if (!out) throw IoError("cannot write " + summary.metadata.string());
  out << meta.dump() << '\n';
  if (!out.flush()) throw IoError("write failed on " + summary.metadata.string());
  return summary;
}

}  // namespace cforge
