#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/byte_source.hpp"

namespace cforge {

enum class DropRule {
  kTooShort,
  kInvalidEncoding,
  kForbiddenChar,
  kDigitRatio,
  kNonAsciiRatio,
  kLetterRatio,
};

enum class RepairRule {
  kHyphenJoin,
  kUnitJoin,
  kNumberJoin,
  kSoftHyphen,
  kUrl,
  kEmail,
  kDashNorm,
  kCharNorm,
  kSpaceCollapse,
};

inline constexpr std::array kAllDropRules = {
    DropRule::kTooShort,    DropRule::kInvalidEncoding, DropRule::kForbiddenChar,
    DropRule::kDigitRatio,  DropRule::kNonAsciiRatio,   DropRule::kLetterRatio,
};

inline constexpr std::array kAllRepairRules = {
    RepairRule::kHyphenJoin, RepairRule::kUnitJoin, RepairRule::kNumberJoin,
    RepairRule::kSoftHyphen, RepairRule::kUrl,      RepairRule::kEmail,
    RepairRule::kDashNorm,   RepairRule::kCharNorm, RepairRule::kSpaceCollapse,
};

std::string_view to_string(DropRule rule);
std::string_view to_string(RepairRule rule);

/// Set of codepoints with an O(1) path for ASCII/Latin-1.
class CodepointSet {
 public:
  CodepointSet() = default;
  CodepointSet(std::initializer_list<char32_t> items);

  bool contains(char32_t c) const {
    return c < 256 ? low_.test(c) : high_.count(c) > 0;
  }
  void insert(char32_t c);
  void erase(char32_t c);
  std::vector<char32_t> items() const;

  friend bool operator==(const CodepointSet&, const CodepointSet&) = default;

 private:
  std::bitset<256> low_;
  std::set<char32_t> high_;
};

/// C0 and C1 controls (plus DEL) except TAB and LF, and U+FFFD.
CodepointSet default_forbidden_chars();

struct CleanConfig {
  std::size_t min_line_chars = 20;
  double max_digit_ratio = 0.25;
  double max_non_ascii_ratio = 0.40;
  double min_letter_ratio = 0.50;
  CodepointSet forbidden_chars = default_forbidden_chars();
  bool strip_urls = true;
  bool strip_emails = true;
  bool normalize_romanian_cedilla = true;

  /// Throws ConfigError when a ratio leaves [0,1], min_line_chars is 0, or
  /// LF is marked forbidden.
  void validate() const;
};

struct LineVerdict {
  bool kept = true;
  std::optional<DropRule> drop_rule;
  std::vector<RepairRule> repairs_applied;
};

struct CleanResult {
  std::optional<std::string> line;
  LineVerdict verdict;
};

struct CleanReport {
  std::uint64_t lines_in = 0;
  std::uint64_t lines_out = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  std::map<DropRule, std::uint64_t> per_rule_drops;
  std::map<RepairRule, std::uint64_t> per_rule_repairs;
  double elapsed_seconds = 0.0;
  bool incomplete = false;
  std::string error;

  std::uint64_t total_drops() const;
  double throughput_bytes_per_second() const;
  void record(const LineVerdict& verdict);
  void merge(const CleanReport& other);

  /// Keys: lines_in, lines_out, bytes_in, bytes_out, drops.<rule>,
  /// repairs.<rule>, elapsed_seconds, throughput_bytes_per_second, incomplete.
  std::string to_json() const;
};

// Individual transforms. Each one is total and idempotent.
std::string normalize_chars(std::string_view line, const CleanConfig& config);
std::string fix_spacing_artifacts(std::string_view line);
std::string strip_patterns(std::string_view line, const CleanConfig& config);
LineVerdict filter_line(std::string_view line, const CleanConfig& config);

/// Full cascade on one raw record (bytes may be invalid UTF-8).
CleanResult clean_line(std::string_view raw, const CleanConfig& config);

struct StreamOptions {
  std::size_t workers = 1;
  std::size_t batch_bytes = 4 << 20;
  std::size_t batch_lines = 16384;
};

/// Cleans LF-delimited records from `input` into `output`, preserving order.
/// I/O failures end the run early with `incomplete` set.
CleanReport clean_stream(ByteSource& input, std::ostream& output, const CleanConfig& config,
                         const StreamOptions& options = {});

}  // namespace cforge
