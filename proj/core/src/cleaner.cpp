#include "cforge/cleaner.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <thread>

#include "cforge/error.hpp"
#include "cforge/unicode.hpp"
#include "json.hpp"

namespace cforge {
namespace {

using unicode::is_decimal_digit;
using unicode::is_letter;
using unicode::is_whitespace;
using U32 = std::u32string;

class RepairLog {
 public:
  explicit RepairLog(std::vector<RepairRule>* sink) : sink_(sink) {}
  void note(RepairRule rule) {
    if (sink_ != nullptr && std::find(sink_->begin(), sink_->end(), rule) == sink_->end()) {
      sink_->push_back(rule);
    }
  }

 private:
  std::vector<RepairRule>* sink_;
};

bool is_dash(char32_t c) {
  return (c >= 0x2010 && c <= 0x2015) || c == 0x2212 || c == 0xFE58 || c == 0xFE63 ||
         c == 0xFF0D;
}

char32_t comma_below(char32_t c) {
  switch (c) {
    case 0x015E: return 0x0218;
    case 0x015F: return 0x0219;
    case 0x0162: return 0x021A;
    case 0x0163: return 0x021B;
    default: return 0;
  }
}

bool is_ascii_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || ((c | 0x20) >= 'a' && (c | 0x20) <= 'z');
}

bool is_ascii_letter(char32_t c) { return (c | 0x20) >= 'a' && (c | 0x20) <= 'z'; }

bool normalize_u32(U32& s, const CleanConfig& config, RepairLog log) {
  if (std::all_of(s.begin(), s.end(), [](char32_t c) { return c < unicode::kSoftHyphen; })) {
    return false;
  }
  U32 out;
  out.reserve(s.size());
  bool changed = false;
  // A U+201D that closes an open U+201E is a Romanian quote pair and stays.
  bool low_quote_open = false;
  for (char32_t c : s) {
    if (is_dash(c)) {
      out.push_back(U'-');
      log.note(RepairRule::kDashNorm);
      changed = true;
    } else if (c == unicode::kSoftHyphen) {
      log.note(RepairRule::kSoftHyphen);
      changed = true;
    } else if (c == 0x2018 || c == 0x2019) {
      out.push_back(U'\'');
      log.note(RepairRule::kCharNorm);
      changed = true;
    } else if (c == 0x201C) {
      out.push_back(U'"');
      log.note(RepairRule::kCharNorm);
      changed = true;
    } else if (c == 0x201E) {
      low_quote_open = true;
      out.push_back(c);
    } else if (c == 0x201D) {
      if (low_quote_open) {
        out.push_back(c);
        low_quote_open = false;
      } else {
        out.push_back(U'"');
        log.note(RepairRule::kCharNorm);
        changed = true;
      }
    } else if (char32_t fixed = config.normalize_romanian_cedilla ? comma_below(c) : 0) {
      out.push_back(fixed);
      log.note(RepairRule::kCharNorm);
      changed = true;
    } else {
      out.push_back(c);
    }
  }
  s.swap(out);
  return changed;
}

bool is_collapsed(const U32& s) {
  if (s.empty()) return true;
  if (is_whitespace(s.front()) || is_whitespace(s.back())) return false;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (is_whitespace(s[i]) && (s[i] != U' ' || s[i - 1] == U' ')) return false;
  }
  return true;
}

bool collapse_spaces(U32& s) {
  if (is_collapsed(s)) return false;
  U32 out;
  out.reserve(s.size());
  bool pending = false;
  for (char32_t c : s) {
    if (is_whitespace(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(U' ');
      pending = false;
      out.push_back(c);
    }
  }
  if (out == s) return false;
  s.swap(out);
  return true;
}

std::size_t letter_run(const U32& s, std::size_t from) {
  std::size_t k = from;
  while (k < s.size() && is_letter(s[k])) ++k;
  return k - from;
}

std::size_t trailing_letters(const U32& s) {
  std::size_t k = 0;
  while (k < s.size() && is_letter(s[s.size() - 1 - k])) ++k;
  return k;
}

// One left-to-right pass of the three join repairs.
bool join_pass(U32& s, RepairLog log) {
  bool candidate = false;
  for (std::size_t i = 0; i + 1 < s.size() && !candidate; ++i) {
    const char32_t c = s[i];
    candidate = (c == U'-' || c == U'/' || c == U',' || c == U'.') && is_whitespace(s[i + 1]);
  }
  if (!candidate) return false;
  U32 out;
  out.reserve(s.size());
  bool changed = false;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char32_t c = s[i];
    if (c == U'-' || c == U'/' || c == U',' || c == U'.') {
      std::size_t j = i + 1;
      while (j < n && is_whitespace(s[j])) ++j;
      if (j > i + 1 && j < n && !out.empty()) {
        std::optional<RepairRule> rule;
        if (c == U'-' && is_letter(out.back()) && unicode::is_lowercase_letter(s[j])) {
          rule = RepairRule::kHyphenJoin;
        } else if (c == U'/') {
          const std::size_t left = trailing_letters(out);
          const std::size_t right = letter_run(s, j);
          if (left >= 1 && left <= 4 && right >= 1 && right <= 4) rule = RepairRule::kUnitJoin;
        } else if ((c == U',' || c == U'.') && is_decimal_digit(out.back()) &&
                   is_decimal_digit(s[j])) {
          rule = RepairRule::kNumberJoin;
        }
        if (rule) {
          out.push_back(c);
          log.note(*rule);
          changed = true;
          i = j - 1;
          continue;
        }
      }
    }
    out.push_back(c);
  }
  if (changed) s.swap(out);
  return changed;
}

bool fix_spacing_u32(U32& s, RepairLog log) {
  bool changed = false;
  for (;;) {
    bool pass = join_pass(s, log);
    if (collapse_spaces(s)) {
      log.note(RepairRule::kSpaceCollapse);
      pass = true;
    }
    if (!pass) break;
    changed = true;
  }
  return changed;
}

std::size_t scheme_length(const U32& s, std::size_t i) {
  static constexpr std::u32string_view kSchemes[] = {U"https://", U"http://", U"ftp://"};
  for (auto scheme : kSchemes) {
    if (i + scheme.size() > s.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < scheme.size() && ok; ++k) {
      char32_t c = s[i + k];
      if (c >= 'A' && c <= 'Z') c += 32;
      ok = c == scheme[k];
    }
    if (ok) return scheme.size();
  }
  return 0;
}

bool starts_www(const U32& s, std::size_t i) {
  if (i + 4 > s.size()) return false;
  for (std::size_t k = 0; k < 3; ++k) {
    if ((s[i + k] | 0x20) != U'w') return false;
  }
  if (s[i + 3] != U'.') return false;
  return i == 0 || (s[i - 1] < 0x80 && !is_ascii_alnum(s[i - 1]));
}

bool remove_urls(U32& s) {
  U32 out;
  bool removed = false;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n;) {
    const char32_t lead = s[i] | 0x20;
    std::size_t prefix = 0;
    if (lead == U'h' || lead == U'f') prefix = scheme_length(s, i);
    if (lead == U'w' && starts_www(s, i)) prefix = 4;
    if (prefix > 0 && i + prefix < n && !is_whitespace(s[i + prefix])) {
      if (!removed) out.assign(s, 0, i);
      while (i < n && !is_whitespace(s[i])) ++i;
      removed = true;
      continue;
    }
    if (removed) out.push_back(s[i]);
    ++i;
  }
  if (removed) s.swap(out);
  return removed;
}

// Email grammar: non-space "@" non-space "." tld, with tld a maximal run of
// 2..12 ASCII letters. The match starts at the token start and ends after the
// last qualifying tld in the token.
bool remove_emails(U32& s) {
  if (s.find(U'@') == U32::npos) return false;
  U32 out;
  bool removed = false;
  const std::size_t n = s.size();
  std::size_t i = 0;
  while (i < n) {
    if (is_whitespace(s[i])) {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t start = i;
    std::size_t end = start;
    while (end < n && !is_whitespace(s[end])) ++end;

    std::size_t first_at = std::u32string::npos;
    std::size_t match_end = std::u32string::npos;
    for (std::size_t k = start + 1; k < end; ++k) {
      if (s[k] == U'@' && first_at == std::u32string::npos) first_at = k;
      if (s[k] == U'.' && first_at != std::u32string::npos && k >= first_at + 2) {
        std::size_t e = k + 1;
        while (e < end && is_ascii_letter(s[e])) ++e;
        const std::size_t tld = e - (k + 1);
        if (tld >= 2 && tld <= 12) match_end = e;
      }
    }
    if (match_end != std::u32string::npos) {
      removed = true;
      out.append(s, match_end, end - match_end);
    } else {
      out.append(s, start, end - start);
    }
    i = end;
  }
  if (removed) s.swap(out);
  return removed;
}

bool strip_u32(U32& s, const CleanConfig& config, RepairLog log) {
  bool changed = false;
  for (;;) {
    bool pass = false;
    if (config.strip_urls && remove_urls(s)) {
      log.note(RepairRule::kUrl);
      pass = true;
    }
    if (config.strip_emails && remove_emails(s)) {
      log.note(RepairRule::kEmail);
      pass = true;
    }
    if (!pass) break;
    collapse_spaces(s);
    changed = true;
  }
  return changed;
}

std::optional<DropRule> filter_u32(const U32& s, const CleanConfig& config) {
  if (s.size() < config.min_line_chars) return DropRule::kTooShort;
  std::size_t nonspace = 0, digits = 0, non_ascii = 0, letters = 0;
  bool forbidden = false;
  for (char32_t c : s) {
    if (config.forbidden_chars.contains(c)) forbidden = true;
    if (is_whitespace(c)) continue;
    ++nonspace;
    if (c >= 0x80) ++non_ascii;
    if (is_decimal_digit(c)) {
      ++digits;
    } else if (is_letter(c)) {
      ++letters;
    }
  }
  if (nonspace == 0) return DropRule::kTooShort;
  if (forbidden) return DropRule::kForbiddenChar;
  const auto denom = static_cast<double>(nonspace);
  if (static_cast<double>(digits) / denom > config.max_digit_ratio) return DropRule::kDigitRatio;
  if (static_cast<double>(non_ascii) / denom > config.max_non_ascii_ratio) {
    return DropRule::kNonAsciiRatio;
  }
  if (static_cast<double>(letters) / denom < config.min_letter_ratio) {
    return DropRule::kLetterRatio;
  }
  return std::nullopt;
}

// Removes whitespace-delimited tokens containing U+FFFD. Returns true when
// at least one token was removed.
bool remove_invalid_tokens(U32& s) {
  if (s.find(unicode::kReplacementChar) == U32::npos) return false;
  U32 out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_whitespace(s[i])) {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t end = i;
    bool bad = false;
    while (end < s.size() && !is_whitespace(s[end])) {
      bad = bad || s[end] == unicode::kReplacementChar;
      ++end;
    }
    if (!bad) out.append(s, i, end - i);
    i = end;
  }
  s.swap(out);
  return true;
}

void validate_ratio(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must be in [0,1], got " + std::to_string(value));
  }
}

CleanResult drop(LineVerdict verdict, DropRule rule) {
  verdict.kept = false;
  verdict.drop_rule = rule;
  return {std::nullopt, std::move(verdict)};
}

}  // namespace

std::string_view to_string(DropRule rule) {
  switch (rule) {
    case DropRule::kTooShort: return "too-short";
    case DropRule::kInvalidEncoding: return "invalid-encoding";
    case DropRule::kForbiddenChar: return "forbidden-char";
    case DropRule::kDigitRatio: return "digit-ratio";
    case DropRule::kNonAsciiRatio: return "non-ascii-ratio";
    case DropRule::kLetterRatio: return "letter-ratio";
  }
  return "unknown";
}

std::string_view to_string(RepairRule rule) {
  switch (rule) {
    case RepairRule::kHyphenJoin: return "hyphen-join";
    case RepairRule::kUnitJoin: return "unit-join";
    case RepairRule::kNumberJoin: return "number-join";
    case RepairRule::kSoftHyphen: return "soft-hyphen";
    case RepairRule::kUrl: return "url";
    case RepairRule::kEmail: return "email";
    case RepairRule::kDashNorm: return "dash-norm";
    case RepairRule::kCharNorm: return "char-norm";
    case RepairRule::kSpaceCollapse: return "space-collapse";
  }
  return "unknown";
}

CodepointSet::CodepointSet(std::initializer_list<char32_t> items) {
  for (char32_t c : items) insert(c);
}

void CodepointSet::insert(char32_t c) {
  if (c < 256) {
    low_.set(c);
  } else {
    high_.insert(c);
  }
}

void CodepointSet::erase(char32_t c) {
  if (c < 256) {
    low_.reset(c);
  } else {
    high_.erase(c);
  }
}

std::vector<char32_t> CodepointSet::items() const {
  std::vector<char32_t> out;
  for (char32_t c = 0; c < 256; ++c) {
    if (low_.test(c)) out.push_back(c);
  }
  out.insert(out.end(), high_.begin(), high_.end());
  return out;
}

CodepointSet default_forbidden_chars() {
  CodepointSet set;
  for (char32_t c = 0; c < 0x20; ++c) {
    if (c != U'\t' && c != U'\n') set.insert(c);
  }
  for (char32_t c = 0x7F; c <= 0x9F; ++c) set.insert(c);
  set.insert(unicode::kReplacementChar);
  return set;
}

void CleanConfig::validate() const {
  if (min_line_chars < 1) throw ConfigError("min_line_chars must be >= 1");
  validate_ratio(max_digit_ratio, "max_digit_ratio");
  validate_ratio(max_non_ascii_ratio, "max_non_ascii_ratio");
  validate_ratio(min_letter_ratio, "min_letter_ratio");
  if (forbidden_chars.contains(U'\n')) {
    throw ConfigError("forbidden_chars must not contain LF (the record separator)");
  }
}

std::uint64_t CleanReport::total_drops() const {
  std::uint64_t total = 0;
  for (const auto& [rule, count] : per_rule_drops) total += count;
  return total;
}

double CleanReport::throughput_bytes_per_second() const {
  return elapsed_seconds > 0.0 ? static_cast<double>(bytes_in) / elapsed_seconds : 0.0;
}

void CleanReport::record(const LineVerdict& verdict) {
  ++lines_in;
  if (verdict.kept) {
    ++lines_out;
  } else {
    ++per_rule_drops[*verdict.drop_rule];
  }
  for (RepairRule rule : verdict.repairs_applied) ++per_rule_repairs[rule];
}

void CleanReport::merge(const CleanReport& other) {
  lines_in += other.lines_in;
  lines_out += other.lines_out;
  bytes_in += other.bytes_in;
  bytes_out += other.bytes_out;
  for (const auto& [rule, count] : other.per_rule_drops) per_rule_drops[rule] += count;
  for (const auto& [rule, count] : other.per_rule_repairs) per_rule_repairs[rule] += count;
}

std::string CleanReport::to_json() const {
  nlohmann::ordered_json j;
  j["lines_in"] = lines_in;
  j["lines_out"] = lines_out;
  j["bytes_in"] = bytes_in;
  j["bytes_out"] = bytes_out;
  auto& drops = j["drops"] = nlohmann::ordered_json::object();
  for (DropRule rule : kAllDropRules) {
    const auto it = per_rule_drops.find(rule);
    drops[std::string(to_string(rule))] = it == per_rule_drops.end() ? 0 : it->second;
  }
  auto& repairs = j["repairs"] = nlohmann::ordered_json::object();
  for (RepairRule rule : kAllRepairRules) {
    const auto it = per_rule_repairs.find(rule);
    repairs[std::string(to_string(rule))] = it == per_rule_repairs.end() ? 0 : it->second;
  }
  j["elapsed_seconds"] = elapsed_seconds;
  j["throughput_bytes_per_second"] = throughput_bytes_per_second();
  j["incomplete"] = incomplete;
  if (!error.empty()) j["error"] = error;
  return j.dump();
}

std::string normalize_chars(std::string_view line, const CleanConfig& config) {
  U32 s = unicode::decode_lossy(line);
  normalize_u32(s, config, RepairLog(nullptr));
  return unicode::encode(s);
}

std::string fix_spacing_artifacts(std::string_view line) {
  U32 s = unicode::decode_lossy(line);
  fix_spacing_u32(s, RepairLog(nullptr));
  return unicode::encode(s);
}

std::string strip_patterns(std::string_view line, const CleanConfig& config) {
  U32 s = unicode::decode_lossy(line);
  strip_u32(s, config, RepairLog(nullptr));
  return unicode::encode(s);
}

LineVerdict filter_line(std::string_view line, const CleanConfig& config) {
  LineVerdict verdict;
  if (auto rule = filter_u32(unicode::decode_lossy(line), config)) {
    verdict.kept = false;
    verdict.drop_rule = rule;
  }
  return verdict;
}

CleanResult clean_line(std::string_view raw, const CleanConfig& config) {
  LineVerdict verdict;
  RepairLog log(&verdict.repairs_applied);
  U32 s = unicode::decode_lossy(raw);

  if (remove_invalid_tokens(s) &&
      std::all_of(s.begin(), s.end(), [](char32_t c) { return is_whitespace(c); })) {
    return drop(std::move(verdict), DropRule::kInvalidEncoding);
  }
  if (auto rule = filter_u32(s, config)) return drop(std::move(verdict), *rule);

  // Deleting a URL can expose a new spacing artifact or orphan a closing
  // quote, so the repair stages run until none of them changes the line.
  for (;;) {
    const bool normalized = normalize_u32(s, config, log);
    const bool fixed = fix_spacing_u32(s, log);
    const bool stripped = strip_u32(s, config, log);
    if (!normalized && !fixed && !stripped) break;
  }

  if (auto rule = filter_u32(s, config)) return drop(std::move(verdict), *rule);
  return {unicode::encode(s), std::move(verdict)};
}

namespace {

struct Batch {
  std::string storage;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::string output;
  CleanReport report;

  void clear() {
    storage.clear();
    spans.clear();
    output.clear();
    report = CleanReport{};
  }

  void process(const CleanConfig& config) {
    for (const auto& [offset, size] : spans) {
      CleanResult result = clean_line(std::string_view(storage).substr(offset, size), config);
      report.record(result.verdict);
      if (result.line) {
        output += *result.line;
        output.push_back('\n');
      }
    }
    report.bytes_out = output.size();
  }
};

// Fills `batch` from the reader. Returns false when input is exhausted and
// nothing was read.
bool fill(LineReader& reader, Batch& batch, const StreamOptions& options) {
  batch.clear();
  std::string_view line;
  while (batch.spans.size() < options.batch_lines && batch.storage.size() < options.batch_bytes &&
         reader.next(line)) {
    batch.spans.emplace_back(batch.storage.size(), line.size());
    batch.storage.append(line);
  }
  return !batch.spans.empty();
}

}  // namespace

CleanReport clean_stream(ByteSource& input, std::ostream& output, const CleanConfig& config,
                         const StreamOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  CleanReport report;
  LineReader reader(input);
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<Batch> batches(workers);

  try {
    for (bool more = true; more;) {
      std::size_t filled = 0;
      while (filled < workers && fill(reader, batches[filled], options)) ++filled;
      more = filled == workers;
      if (filled == 0) break;

      if (filled == 1) {
        batches[0].process(config);
      } else {
        std::vector<std::jthread> threads;
        threads.reserve(filled);
        for (std::size_t b = 0; b < filled; ++b) {
          threads.emplace_back([&batch = batches[b], &config] { batch.process(config); });
        }
      }

      for (std::size_t b = 0; b < filled; ++b) {
        output.write(batches[b].output.data(), static_cast<std::streamsize>(batches[b].output.size()));
        if (!output) throw IoError("write to output sink failed");
        report.merge(batches[b].report);
      }
    }
    output.flush();
    if (!output) throw IoError("flush of output sink failed");
  } catch (const IoError& e) {
    report.incomplete = true;
    report.error = e.what();
  }

  report.bytes_in = reader.bytes_consumed();
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace cforge
