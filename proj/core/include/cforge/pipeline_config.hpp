#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/cleaner.hpp"
#include "cforge/pretrain_prep.hpp"
#include "cforge/stats_sampler.hpp"
#include "cforge/vocab_trainer.hpp"

namespace cforge {

/// Settings for a whole run. The file format is line oriented:
///
///   # comment
///   [clean]
///   min_line_chars = 20
///   [inputs]
///   wiki = data/wiki.txt.gz
///
/// Every setting is addressed as "section.key". Keys in [inputs] name corpora.
struct PipelineConfig {
  CleanConfig clean;
  VocabConfig vocab;
  PretrainConfig pretrain;
  std::vector<NamedCorpus> inputs;
  std::filesystem::path output_dir = ".";
  std::size_t workers = 1;
  std::uint64_t seed = 12345;
  std::size_t dev_lines = 5000;
  SampleWeight dev_weight = SampleWeight::kLines;
  std::size_t instances_per_shard = 100000;

  /// Throws ConfigError naming the offending setting.
  void apply_setting(std::string_view key, std::string_view value);
  /// Throws ParseError (with line number) or ConfigError.
  void apply_text(std::string_view text);
  void load_file(const std::filesystem::path& path);
  /// CFORGE_<SECTION>_<KEY> for every known key, e.g. CFORGE_CLEAN_MIN_LINE_CHARS.
  /// The getter defaults to std::getenv. Returns the keys that were applied.
  using EnvGetter = std::function<std::optional<std::string>(const std::string&)>;
  std::vector<std::string> apply_env(const EnvGetter& get = {});

  void validate() const;

  /// Pretraining settings with the run seed folded in.
  PretrainConfig effective_pretrain() const;

  /// Sorted "section.key = value" lines covering every setting.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string digest() const;
};

/// All addressable "section.key" names except the open-ended [inputs] section.
const std::vector<std::string>& known_setting_keys();

/// "CFORGE_CLEAN_MIN_LINE_CHARS" for "clean.min_line_chars".
std::string env_var_name(std::string_view key);

}  // namespace cforge
