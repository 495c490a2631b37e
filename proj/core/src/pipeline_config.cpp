#include "cforge/pipeline_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cforge/error.hpp"
#include "cforge/rng.hpp"

namespace cforge {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError(std::string(key) + ": invalid value '" + std::string(value) + "' (expected " +
                    std::string(want) + ")");
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  std::string v(value);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "true/false");
}

char32_t parse_codepoint(std::string_view key, std::string_view text) {
  if (text.size() > 2 && (text[0] == 'U' || text[0] == 'u') && text[1] == '+') {
    std::uint32_t cp = 0;
    const char* first = text.data() + 2;
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, cp, 16);
    if (ec == std::errc() && ptr == last && cp <= 0x10FFFF) return cp;
  }
  bad_value(key, text, "U+XXXX codepoints");
}

void parse_codepoints(std::string_view key, std::string_view value, CodepointSet& set) {
  for (std::string_view item : split_list(value)) {
    const auto dash = item.find('-');
    if (dash == std::string_view::npos) {
      set.insert(parse_codepoint(key, item));
      continue;
    }
    const char32_t lo = parse_codepoint(key, trim(item.substr(0, dash)));
    const char32_t hi = parse_codepoint(key, trim(item.substr(dash + 1)));
    if (hi < lo) bad_value(key, item, "an ascending range");
    for (char32_t c = lo; c <= hi; ++c) set.insert(c);
  }
}

std::string format_codepoints(const CodepointSet& set) {
  const auto items = set.items();
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j + 1 < items.size() && items[j + 1] == items[j] + 1) ++j;
    if (!out.empty()) out += ',';
    if (j == i) {
      std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(items[i]));
    } else {
      std::snprintf(buf, sizeof buf, "U+%04X-U+%04X", static_cast<unsigned>(items[i]),
                    static_cast<unsigned>(items[j]));
    }
    out += buf;
    i = j + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& known_setting_keys() {
  static const std::vector<std::string> keys = {
      "pipeline.output_dir",
      "pipeline.workers",
      "pipeline.seed",
      "pipeline.dev_lines",
      "pipeline.dev_weight",
      "clean.min_line_chars",
      "clean.max_digit_ratio",
      "clean.max_non_ascii_ratio",
      "clean.min_letter_ratio",
      "clean.forbidden_chars",
      "clean.forbidden_extra",
      "clean.strip_urls",
      "clean.strip_emails",
      "clean.normalize_romanian_cedilla",
      "vocab.size",
      "vocab.alphabet_cap",
      "vocab.casing",
      "vocab.strip_accents",
      "vocab.special_tokens",
      "vocab.min_pair_frequency",
      "pretrain.max_seq_len",
      "pretrain.mask_rate",
      "pretrain.mask_token_rate",
      "pretrain.random_token_rate",
      "pretrain.keep_rate",
      "pretrain.short_seq_prob",
      "pretrain.dupe_factor",
      "pretrain.instances_per_shard",
  };
  return keys;
}

std::string env_var_name(std::string_view key) {
  std::string out = "CFORGE_";
  for (char c : key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

void PipelineConfig::apply_setting(std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key.starts_with("inputs.")) {
    const std::string name(key.substr(7));
    if (name.empty()) throw ConfigError("inputs: corpus name must not be empty");
    if (value.empty()) throw ConfigError(std::string(key) + ": path must not be empty");
    auto it = std::find_if(inputs.begin(), inputs.end(),
                           [&](const NamedCorpus& c) { return c.name == name; });
    if (it != inputs.end()) {
      it->path = std::string(value);
    } else {
      inputs.push_back({name, std::string(value)});
    }
    return;
  }

  if (key == "pipeline.output_dir") {
    if (value.empty()) bad_value(key, value, "a directory");
    output_dir = std::string(value);
  } else if (key == "pipeline.workers") {
    workers = parse_u64(key, value);
  } else if (key == "pipeline.seed") {
    seed = parse_u64(key, value);
  } else if (key == "pipeline.dev_lines") {
    dev_lines = parse_u64(key, value);
  } else if (key == "pipeline.dev_weight") {
    try {
      dev_weight = parse_sample_weight(value);
    } catch (const std::invalid_argument&) {
      bad_value(key, value, "lines, words or bytes");
    }
  } else if (key == "clean.min_line_chars") {
    clean.min_line_chars = parse_u64(key, value);
  } else if (key == "clean.max_digit_ratio") {
    clean.max_digit_ratio = parse_double(key, value);
  } else if (key == "clean.max_non_ascii_ratio") {
    clean.max_non_ascii_ratio = parse_double(key, value);
  } else if (key == "clean.min_letter_ratio") {
    clean.min_letter_ratio = parse_double(key, value);
  } else if (key == "clean.forbidden_chars") {
    CodepointSet set;
    parse_codepoints(key, value, set);
    clean.forbidden_chars = set;
  } else if (key == "clean.forbidden_extra") {
    parse_codepoints(key, value, clean.forbidden_chars);
  } else if (key == "clean.strip_urls") {
    clean.strip_urls = parse_bool(key, value);
  } else if (key == "clean.strip_emails") {
    clean.strip_emails = parse_bool(key, value);
  } else if (key == "clean.normalize_romanian_cedilla") {
    clean.normalize_romanian_cedilla = parse_bool(key, value);
  } else if (key == "vocab.size") {
    vocab.vocab_size = parse_u64(key, value);
  } else if (key == "vocab.alphabet_cap") {
    vocab.alphabet_cap = parse_u64(key, value);
  } else if (key == "vocab.casing") {
    try {
      vocab.casing = parse_casing(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "cased/uncased");
    }
  } else if (key == "vocab.strip_accents") {
    vocab.strip_accents = parse_bool(key, value);
  } else if (key == "vocab.special_tokens") {
    vocab.special_tokens.clear();
    for (auto item : split_list(value)) vocab.special_tokens.emplace_back(item);
  } else if (key == "vocab.min_pair_frequency") {
    vocab.min_pair_frequency = parse_u64(key, value);
  } else if (key == "pretrain.max_seq_len") {
    pretrain.max_seq_len = parse_u64(key, value);
  } else if (key == "pretrain.mask_rate") {
    pretrain.mask_rate = parse_double(key, value);
  } else if (key == "pretrain.mask_token_rate") {
    pretrain.mask_token_rate = parse_double(key, value);
  } else if (key == "pretrain.random_token_rate") {
    pretrain.random_token_rate = parse_double(key, value);
  } else if (key == "pretrain.keep_rate") {
    pretrain.keep_rate = parse_double(key, value);
  } else if (key == "pretrain.short_seq_prob") {
    pretrain.short_seq_prob = parse_double(key, value);
  } else if (key == "pretrain.dupe_factor") {
    pretrain.dupe_factor = parse_u64(key, value);
  } else if (key == "pretrain.instances_per_shard") {
    instances_per_shard = parse_u64(key, value);
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

void PipelineConfig::apply_text(std::string_view text) {
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ParseError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("missing key", line_no);
    if (section.empty()) throw ParseError("setting outside of a [section]", line_no);
    try {
      apply_setting(section + "." + std::string(key), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void PipelineConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::vector<std::string> PipelineConfig::apply_env(const EnvGetter& get) {
  const EnvGetter getter = get ? get : [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  };
  std::vector<std::string> applied;
  for (const std::string& key : known_setting_keys()) {
    const std::string name = env_var_name(key);
    if (auto value = getter(name)) {
      try {
        apply_setting(key, *value);
      } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
      }
      applied.push_back(key);
    }
  }
  return applied;
}

void PipelineConfig::validate() const {
  clean.validate();
  vocab.validate();
  effective_pretrain().validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (instances_per_shard < 1) throw ConfigError("instances_per_shard must be >= 1");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (inputs[i].name == inputs[j].name) {
        throw ConfigError("duplicate input name '" + inputs[i].name + "'");
      }
    }
  }
}

PretrainConfig PipelineConfig::effective_pretrain() const {
  PretrainConfig p = pretrain;
  p.seed = seed;
  return p;
}

std::string PipelineConfig::canonical() const {
  std::vector<std::string> lines;
  auto add = [&lines](std::string key, const std::string& value) {
    lines.push_back(std::move(key) + " = " + value);
  };
  auto boolean = [](bool b) { return std::string(b ? "true" : "false"); };

  add("pipeline.output_dir", output_dir.generic_string());
  add("pipeline.workers", std::to_string(workers));
  add("pipeline.seed", std::to_string(seed));
  add("pipeline.dev_lines", std::to_string(dev_lines));
  add("pipeline.dev_weight", std::string(to_string(dev_weight)));
  add("clean.min_line_chars", std::to_string(clean.min_line_chars));
  add("clean.max_digit_ratio", format_double(clean.max_digit_ratio));
  add("clean.max_non_ascii_ratio", format_double(clean.max_non_ascii_ratio));
  add("clean.min_letter_ratio", format_double(clean.min_letter_ratio));
  add("clean.forbidden_chars", format_codepoints(clean.forbidden_chars));
  add("clean.strip_urls", boolean(clean.strip_urls));
  add("clean.strip_emails", boolean(clean.strip_emails));
  add("clean.normalize_romanian_cedilla", boolean(clean.normalize_romanian_cedilla));
  add("vocab.size", std::to_string(vocab.vocab_size));
  add("vocab.alphabet_cap", std::to_string(vocab.alphabet_cap));
  add("vocab.casing", std::string(to_string(vocab.casing)));
  add("vocab.strip_accents", boolean(vocab.strip_accents));
  add("vocab.special_tokens", join(vocab.special_tokens));
  add("vocab.min_pair_frequency", std::to_string(vocab.min_pair_frequency));
  add("pretrain.max_seq_len", std::to_string(pretrain.max_seq_len));
  add("pretrain.mask_rate", format_double(pretrain.mask_rate));
  add("pretrain.mask_token_rate", format_double(pretrain.mask_token_rate));
  add("pretrain.random_token_rate", format_double(pretrain.random_token_rate));
  add("pretrain.keep_rate", format_double(pretrain.keep_rate));
  add("pretrain.short_seq_prob", format_double(pretrain.short_seq_prob));
  add("pretrain.dupe_factor", std::to_string(pretrain.dupe_factor));
  add("pretrain.instances_per_shard", std::to_string(instances_per_shard));
  for (const NamedCorpus& c : inputs) add("inputs." + c.name, c.path.generic_string());

  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

std::string PipelineConfig::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

}  // namespace cforge
