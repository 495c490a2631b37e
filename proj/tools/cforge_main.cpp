// cforge: corpus cleaning, vocabulary training and pretraining data prep.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cforge/byte_source.hpp"
#include "cforge/cleaner.hpp"
#include "cforge/error.hpp"
#include "cforge/pipeline_config.hpp"
#include "cforge/pretrain_prep.hpp"
#include "cforge/stats_sampler.hpp"
#include "cforge/tokenizer.hpp"
#include "cforge/vocab_trainer.hpp"
#include "cforge/vocabulary.hpp"

namespace fs = std::filesystem;
using namespace cforge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "cforge: " << msg << '\n'; }

void require_input(const fs::path& path) {
  if (path == "-") return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("input not found: " + path.string());
}

fs::path in_output_dir(const PipelineConfig& config, const std::string& flag,
                       const char* default_name) {
  return flag.empty() ? config.output_dir / default_name : fs::path(flag);
}

void ensure_parent(const fs::path& path) {
  if (path == "-" || !path.has_parent_path()) return;
  fs::create_directories(path.parent_path());
}

// "name=path" or a bare path (named after its file name).
NamedCorpus parse_corpus_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  fs::path p(arg);
  std::string name = p.filename().string();
  for (const char* ext : {".gz", ".txt"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.ends_with(e)) name.resize(name.size() - e.size());
  }
  return {name, p};
}

std::vector<NamedCorpus> resolve_corpora(const PipelineConfig& config,
                                         const std::vector<std::string>& args) {
  std::vector<NamedCorpus> corpora;
  if (args.empty()) {
    corpora = config.inputs;
  } else {
    for (const auto& a : args) corpora.push_back(parse_corpus_arg(a));
  }
  if (corpora.empty()) throw UsageError("no input corpora (use --in or an [inputs] section)");
  for (const auto& c : corpora) require_input(c.path);
  return corpora;
}

// Output sink that is either stdout or a checked file.
class Output {
 public:
  explicit Output(const fs::path& path) : path_(path) {
    if (path == "-") return;
    ensure_parent(path);
    file_.open(path, std::ios::binary);
    if (!file_) throw IoError("cannot write " + path.string());
  }
  std::ostream& stream() { return path_ == "-" ? std::cout : file_; }
  bool is_stdout() const { return path_ == "-"; }
  void finish() {
    if (!stream().flush()) throw IoError("write failed on " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream file_;
};

void write_text_file(const fs::path& path, const std::string& text) {
  Output out(path);
  out.stream() << text << '\n';
  out.finish();
}

struct Args {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flag_settings;

  std::vector<std::string> inputs;
  std::string in;
  std::string out;
  std::string report;
  std::string vocab;
  std::string dev_out;
  std::string manifest_out;
  std::string train_out;
  std::string word_freqs_in;
  std::string word_freqs_out;
  std::string metrics_out;
  bool ids = false;
};

// A flag that is sugar for a "section.key" setting, applied after env vars.
CLI::Option* setting_option(CLI::App* app, Args& args, const std::string& flag,
                            const std::string& key, const std::string& help) {
  return app
      ->add_option_function<std::string>(
          flag, [&args, key](const std::string& v) { args.flag_settings.emplace_back(key, v); },
          help + " [" + key + "]")
      ->type_name("VALUE");
}

CLI::Option* setting_flag(CLI::App* app, Args& args, const std::string& flag,
                          const std::string& key, const std::string& help) {
  return app->add_flag_callback(
      flag, [&args, key] { args.flag_settings.emplace_back(key, "true"); },
      help + " [" + key + "]");
}

PipelineConfig assemble_config(const Args& args) {
  PipelineConfig config;
  if (!args.config_path.empty()) config.load_file(args.config_path);
  config.apply_env();
  for (const auto& [key, value] : args.flag_settings) config.apply_setting(key, value);
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got " + s);
    config.apply_setting(s.substr(0, eq), s.substr(eq + 1));
  }
  return config;
}

int run_clean(const PipelineConfig& config, const Args& args) {
  require_input(args.in);
  auto source = open_input(args.in);
  Output out(in_output_dir(config, args.out, "clean.txt"));
  StreamOptions options;
  options.workers = config.workers;
  const CleanReport report = clean_stream(*source, out.stream(), config.clean, options);
  out.finish();
  const std::string json = report.to_json();
  if (!args.report.empty()) write_text_file(args.report, json);
  (out.is_stdout() ? std::cerr : std::cout) << json << '\n';
  if (report.incomplete) {
    log("clean stopped early: " + report.error);
    return kExitRuntime;
  }
  return 0;
}

int run_stats(const PipelineConfig& config, const Args& args) {
  const auto corpora = resolve_corpora(config, args.inputs);
  const std::string json = corpus_stats(corpora).to_json();
  if (!args.out.empty()) write_text_file(args.out, json);
  std::cout << json << '\n';
  return 0;
}

int run_sample_dev(const PipelineConfig& config, const Args& args) {
  const auto corpora = resolve_corpora(config, args.inputs);
  DevSampleOptions options;
  options.n = config.dev_lines;
  options.weight = config.dev_weight;
  options.seed = config.seed;
  options.dev_out = in_output_dir(config, args.dev_out, "dev.txt");
  options.manifest_out = in_output_dir(config, args.manifest_out, "dev.manifest.tsv");
  if (!args.train_out.empty()) options.train_out = args.train_out;
  ensure_parent(options.dev_out);
  ensure_parent(options.manifest_out);
  if (options.train_out) ensure_parent(*options.train_out);
  const DevSample sample = sample_dev(corpora, options);
  for (const auto& [name, quota] : sample.quotas) {
    log("sample-dev: " + name + " quota " + std::to_string(quota));
  }
  log("sample-dev: wrote " + options.dev_out.string() + " and " + options.manifest_out.string());
  return 0;
}

int run_train_vocab(const PipelineConfig& config, const Args& args) {
  WordFreqs freqs;
  if (!args.word_freqs_in.empty()) {
    require_input(args.word_freqs_in);
    freqs = load_word_freqs(args.word_freqs_in);
  } else {
    const auto corpora = resolve_corpora(config, args.inputs);
    config.vocab.validate();
    for (const auto& corpus : corpora) {
      auto source = open_input(corpus.path);
      const WordFreqs part = count_words(*source, config.vocab, config.workers);
      for (const auto& [word, n] : part) freqs[word] += n;
    }
  }
  log("train-vocab: " + std::to_string(freqs.size()) + " distinct words");
  if (!args.word_freqs_out.empty()) save_word_freqs(freqs, args.word_freqs_out);

  TrainStats stats;
  const auto progress = [](std::size_t merges, std::size_t pieces) {
    if (merges % 10000 == 0) {
      log("train-vocab: " + std::to_string(merges) + " merges, " + std::to_string(pieces) +
          " pieces");
    }
  };
  const Vocabulary vocab = train_bpe(freqs, config.vocab, &stats, progress);
  const fs::path out = in_output_dir(config, args.out, "vocab.txt");
  ensure_parent(out);
  save_vocab(vocab, out);
  log("train-vocab: " + std::to_string(vocab.size()) + " pieces, " +
      std::to_string(vocab.merges().size()) + " merges, " +
      std::to_string(stats.words_excluded) + " words outside the alphabet; wrote " +
      out.string());
  return 0;
}

Vocabulary load_vocab_arg(const PipelineConfig& config, const Args& args) {
  const fs::path path = in_output_dir(config, args.vocab, "vocab.txt");
  require_input(path);
  return load_vocab(path);
}

int run_tokenize(const PipelineConfig& config, const Args& args) {
  const Vocabulary vocab = load_vocab_arg(config, args);
  require_input(args.in);
  auto source = open_input(args.in);
  Output out(args.out.empty() ? fs::path("-") : fs::path(args.out));
  WordPieceTokenizer tokenizer(vocab);
  LineReader reader(*source);
  std::string_view line;
  std::vector<TokenId> ids;
  std::string buf;
  while (reader.next(line)) {
    buf.clear();
    if (args.ids) {
      ids.clear();
      tokenizer.line_ids(line, ids);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) buf += ' ';
        buf += std::to_string(ids[i]);
      }
    } else {
      const TokenizationResult r = tokenizer.tokenize_line(line);
      for (std::size_t i = 0; i < r.pieces.size(); ++i) {
        if (i) buf += ' ';
        buf += r.pieces[i];
      }
    }
    buf += '\n';
    out.stream() << buf;
  }
  out.finish();
  return 0;
}

int run_measure(const PipelineConfig& config, const Args& args) {
  const Vocabulary vocab = load_vocab_arg(config, args);
  const fs::path in = args.in.empty() ? config.output_dir / "dev.txt" : fs::path(args.in);
  require_input(in);
  auto source = open_input(in);
  const std::string json = measure(*source, vocab, config.workers).to_json();
  if (!args.metrics_out.empty()) write_text_file(args.metrics_out, json);
  std::cout << json << '\n';
  return 0;
}

int run_prep(const PipelineConfig& config, const Args& args) {
  const Vocabulary vocab = load_vocab_arg(config, args);
  require_input(args.in);
  auto source = open_input(args.in);
  const fs::path out_dir = in_output_dir(config, args.out, "instances");
  const PrepSummary summary = prepare_instances(*source, vocab, config.effective_pretrain(),
                                                out_dir, config.instances_per_shard);
  log("prep: " + std::to_string(summary.packed) + " sequences, " +
      std::to_string(summary.written) + " instances in " + std::to_string(summary.shards.size()) +
      " shards under " + out_dir.string());
  std::cout << "{\"sequences\":" << summary.packed << ",\"instances\":" << summary.written
            << ",\"shards\":" << summary.shards.size() << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  CLI::App app{"cforge: corpus cleaning, WordPiece vocabulary training and MLM data prep"};
  app.require_subcommand(1);
  app.fallthrough();
  Args args;

  app.add_option("-c,--config", args.config_path, "key = value config file with [sections]")
      ->check(CLI::ExistingFile);
  app.add_option("--set", args.sets, "Override a setting, section.key=value (repeatable)");
  setting_option(&app, args, "-j,--workers", "pipeline.workers", "Worker threads");
  setting_option(&app, args, "--seed", "pipeline.seed", "Random seed");
  setting_option(&app, args, "--output-dir", "pipeline.output_dir", "Default output directory");

  auto* clean = app.add_subcommand("clean", "Clean a raw corpus (gzip or plain, '-' for stdin)");
  clean->add_option("-i,--in", args.in, "Raw input")->required();
  clean->add_option("-o,--out", args.out, "Cleaned output ('-' for stdout)");
  clean->add_option("--report", args.report, "Also write the report JSON here");
  setting_option(clean, args, "--min-chars", "clean.min_line_chars", "Minimum line length");
  setting_option(clean, args, "--max-digit-ratio", "clean.max_digit_ratio", "Digit ratio cap");
  setting_option(clean, args, "--max-non-ascii-ratio", "clean.max_non_ascii_ratio",
                 "Non-ASCII ratio cap");
  setting_option(clean, args, "--min-letter-ratio", "clean.min_letter_ratio", "Letter ratio floor");

  auto* stats = app.add_subcommand("stats", "Line, word and byte counts per corpus");
  stats->add_option("-i,--in", args.inputs, "Corpora as name=path or path (repeatable)");
  stats->add_option("-o,--out", args.out, "Also write the JSON here");

  auto* sample = app.add_subcommand("sample-dev", "Draw a proportional held-out dev sample");
  sample->add_option("-i,--in", args.inputs, "Corpora as name=path or path (repeatable)");
  setting_option(sample, args, "-n,--lines", "pipeline.dev_lines", "Dev sample size");
  setting_option(sample, args, "--weight", "pipeline.dev_weight",
                 "Proportional to lines, words or bytes");
  sample->add_option("--dev-out", args.dev_out, "Dev lines (default <output-dir>/dev.txt)");
  sample->add_option("--manifest-out", args.manifest_out,
                     "Manifest TSV (default <output-dir>/dev.manifest.tsv)");
  sample->add_option("--train-out", args.train_out, "Write the remaining lines here");

  auto* train = app.add_subcommand("train-vocab", "Train a WordPiece vocabulary with BPE");
  train->add_option("-i,--in", args.inputs, "Training corpora (repeatable)");
  train->add_option("-o,--out", args.out, "Vocabulary file (default <output-dir>/vocab.txt)");
  train->add_option("--word-freqs", args.word_freqs_in, "Train from a saved word-frequency file");
  train->add_option("--save-word-freqs", args.word_freqs_out, "Save word frequencies here");
  setting_option(train, args, "--size", "vocab.size", "Vocabulary size");
  setting_option(train, args, "--casing", "vocab.casing", "cased or uncased");
  setting_flag(train, args, "--strip-accents", "vocab.strip_accents", "Strip accents");
  setting_option(train, args, "--alphabet-cap", "vocab.alphabet_cap", "Max base characters");
  setting_option(train, args, "--min-pair-frequency", "vocab.min_pair_frequency",
                 "Stop below this pair frequency");

  auto* tok = app.add_subcommand("tokenize", "Tokenize lines into pieces or ids");
  tok->add_option("-v,--vocab", args.vocab, "Vocabulary file");
  tok->add_option("-i,--in", args.in, "Input text ('-' for stdin)")->required();
  tok->add_option("-o,--out", args.out, "Output (default stdout)");
  tok->add_flag("--ids", args.ids, "Print ids instead of pieces");

  auto* meas = app.add_subcommand("measure", "Tokens per word and UNK per word on a dev set");
  meas->add_option("-v,--vocab", args.vocab, "Vocabulary file");
  meas->add_option("-i,--in", args.in, "Dev text (default <output-dir>/dev.txt)");
  meas->add_option("-o,--out", args.metrics_out, "Also write the JSON here");

  auto* prep = app.add_subcommand("prep", "Pack and mask MLM training instances");
  prep->add_option("-v,--vocab", args.vocab, "Vocabulary file");
  prep->add_option("-i,--in", args.in, "Training text")->required();
  prep->add_option("-o,--out-dir", args.out, "Shard directory (default <output-dir>/instances)");
  setting_option(prep, args, "--max-seq-len", "pretrain.max_seq_len", "Sequence length");
  setting_option(prep, args, "--mask-rate", "pretrain.mask_rate", "Masked fraction");
  setting_option(prep, args, "--short-seq-prob", "pretrain.short_seq_prob",
                 "Probability of a shorter target length");
  setting_option(prep, args, "--dupe-factor", "pretrain.dupe_factor", "Masked copies per sequence");
  setting_option(prep, args, "--instances-per-shard", "pretrain.instances_per_shard",
                 "Instances per shard file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  PipelineConfig config;
  try {
    config = assemble_config(args);
  } catch (const std::exception& e) {
    log(std::string("usage error: ") + e.what());
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  log(name + ": config digest " + config.digest() + ", seed " + std::to_string(config.seed));

  const auto started = std::chrono::steady_clock::now();
  try {
    config.validate();
    int rc = 0;
    if (sub == clean) {
      rc = run_clean(config, args);
    } else if (sub == stats) {
      rc = run_stats(config, args);
    } else if (sub == sample) {
      rc = run_sample_dev(config, args);
    } else if (sub == train) {
      rc = run_train_vocab(config, args);
    } else if (sub == tok) {
      rc = run_tokenize(config, args);
    } else if (sub == meas) {
      rc = run_measure(config, args);
    } else if (sub == prep) {
      rc = run_prep(config, args);
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2fs", secs);
    log(name + ": done in " + buf);
    return rc;
  } catch (const UsageError& e) {
    log(std::string("usage error: ") + e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    log(std::string("configuration error: ") + e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitRuntime;
  }
}
