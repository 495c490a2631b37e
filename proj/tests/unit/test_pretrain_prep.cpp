#include "cforge/pretrain_prep.hpp"

#include <stdexcept>

#include "cforge/error.hpp"
#include "cforge/vocab_trainer.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace cforge;

namespace {

// Specials plus single letters a..j, each its own word: a line of k letters
// separated by spaces is exactly k pieces.
Vocabulary letter_vocab() {
  WordFreqs freqs;
  for (char c = 'a'; c <= 'j'; ++c) freqs[std::string(1, c)] = 3;
  VocabConfig cfg;
  cfg.vocab_size = 100;
  return train_bpe(freqs, cfg);
}

std::string line_of(std::size_t pieces, char c = 'a') {
  std::string s;
  for (std::size_t i = 0; i < pieces; ++i) {
    if (i) s += ' ';
    s += static_cast<char>(c + i % 10);
  }
  return s;
}

PretrainConfig no_short(std::size_t max_seq_len = 128) {
  PretrainConfig c;
  c.max_seq_len = max_seq_len;
  c.short_seq_prob = 0.0;
  return c;
}

std::vector<TrainingInstance> pack(const std::string& text, const PretrainConfig& cfg) {
  StringSource src(text);
  return pack_sequences(src, letter_vocab(), cfg);
}

}  // namespace

TEST_SUITE("pretrain_prep") {

TEST_CASE("two 60-piece lines share one instance") {
  const auto out = pack(line_of(60) + "\n" + line_of(60) + "\n", no_short());
  REQUIRE(out.size() == 1);
  CHECK(out[0].attention_len == 122);
  CHECK(out[0].token_ids.size() == 128);
  CHECK_FALSE(out[0].split_line);
}

TEST_CASE("a 10-piece line alone at EOF") {
  const auto out = pack(line_of(10) + "\n", no_short());
  REQUIRE(out.size() == 1);
  CHECK(out[0].attention_len == 12);
}

TEST_CASE("empty corpus gives no instances") {
  CHECK(pack("", no_short()).empty());
  CHECK(pack("\n\n", no_short()).empty());
}

TEST_CASE("layout: CLS, SEP, PAD") {
  const Vocabulary v = letter_vocab();
  const auto layout = InstanceLayout::from(v, no_short(16));
  const auto out = pack(line_of(7) + "\n", no_short(16));
  REQUIRE(out.size() == 1);
  const auto& ids = out[0].token_ids;
  CHECK(ids[0] == layout.cls);
  CHECK(ids[8] == layout.sep);
  for (std::size_t i = 9; i < 16; ++i) CHECK(ids[i] == layout.pad);
  CHECK(ids[1] == *v.find("a"));
}

TEST_CASE("lines never straddle instances") {
  // 70 + 70 > 126, so two instances.
  const auto out = pack(line_of(70) + "\n" + line_of(70) + "\n", no_short());
  REQUIRE(out.size() == 2);
  CHECK(out[0].attention_len == 72);
  CHECK(out[1].attention_len == 72);
}

TEST_CASE("a line longer than max_seq_len - 2 is split and flagged") {
  const auto out = pack(line_of(30) + "\n", no_short(12));  // capacity 10
  REQUIRE(out.size() == 3);
  for (const auto& inst : out) {
    CHECK(inst.split_line);
    CHECK(inst.attention_len == 12);
  }
  // 25 pieces: 10 + 10 + 5, and the 5-piece tail is kept.
  const auto tail = pack(line_of(25) + "\n", no_short(12));
  REQUIRE(tail.size() == 3);
  CHECK(tail[2].attention_len == 7);
}

TEST_CASE("tail shorter than five pieces is dropped") {
  CHECK(pack(line_of(4) + "\n", no_short()).empty());
  CHECK(pack(line_of(5) + "\n", no_short()).size() == 1);
  const auto out = pack(line_of(100) + "\n" + line_of(30) + "\n" + line_of(3) + "\n", no_short());
  // 100 alone (100 + 30 > 126), then 30 + 3 = 33 flushed at EOF.
  REQUIRE(out.size() == 2);
  CHECK(out[1].attention_len == 35);
}

TEST_CASE("short_seq_prob lowers the target length but never splits lines") {
  PretrainConfig cfg = no_short(64);
  cfg.short_seq_prob = 1.0;
  std::string text;
  for (int i = 0; i < 200; ++i) text += line_of(3 + i % 5) + "\n";
  const auto out = pack(text, cfg);
  bool some_short = false;
  for (const auto& inst : out) {
    CHECK(inst.attention_len <= 64);
    CHECK_FALSE(inst.split_line);
    some_short = some_short || inst.attention_len < 40;
  }
  CHECK(some_short);
}

TEST_CASE("masked_count rounding") {
  CHECK(masked_count(20, 0.15) == 3);
  CHECK(masked_count(3, 0.15) == 1);
  CHECK(masked_count(1, 0.15) == 1);
  CHECK(masked_count(10, 0.15) == 2);   // 1.5 rounds half up
  CHECK(masked_count(30, 0.15) == 5);   // 4.5 rounds half up
  CHECK(masked_count(126, 0.15) == 19);  // 18.9
  CHECK(masked_count(2, 0.9) == 2);
}

TEST_CASE("apply_mlm_mask") {
  const Vocabulary v = letter_vocab();
  PretrainConfig cfg = no_short(32);
  const auto layout = InstanceLayout::from(v, cfg);
  const auto packed = pack(line_of(20) + "\n", cfg);
  REQUIRE(packed.size() == 1);

  const auto m = apply_mlm_mask(packed[0], cfg, layout, 0);
  CHECK(m.masked_positions.size() == 3);
  CHECK(m.masked_labels.size() == 3);
  CHECK(check_instance(m, layout).empty());
  CHECK(unmask(m).token_ids == packed[0].token_ids);
  CHECK(apply_mlm_mask(packed[0], cfg, layout, 0) == m);

  bool differs = false;
  for (std::uint64_t ord = 1; ord < 20 && !differs; ++ord) {
    differs = apply_mlm_mask(packed[0], cfg, layout, ord).masked_positions != m.masked_positions;
  }
  CHECK(differs);

  const auto three = pack(line_of(5) + "\n", no_short(32));
  TrainingInstance tiny = three[0];
  tiny.attention_len = 2;
  CHECK_THROWS_AS(apply_mlm_mask(tiny, cfg, layout, 0), std::invalid_argument);
}

TEST_CASE("random replacements come from regular ids") {
  const Vocabulary v = letter_vocab();
  PretrainConfig cfg = no_short(32);
  cfg.mask_token_rate = 0.0;
  cfg.random_token_rate = 1.0;
  cfg.keep_rate = 0.0;
  const auto layout = InstanceLayout::from(v, cfg);
  const auto packed = pack(line_of(30) + "\n", cfg);
  for (std::uint64_t ord = 0; ord < 200; ++ord) {
    const auto m = apply_mlm_mask(packed[0], cfg, layout, ord);
    for (auto pos : m.masked_positions) {
      CHECK(m.token_ids[pos] >= layout.first_regular);
      CHECK(static_cast<std::size_t>(m.token_ids[pos]) < v.size());
    }
  }
}

TEST_CASE("check_instance reports violations") {
  const Vocabulary v = letter_vocab();
  PretrainConfig cfg = no_short(16);
  const auto layout = InstanceLayout::from(v, cfg);
  const auto good = apply_mlm_mask(pack(line_of(10) + "\n", cfg)[0], cfg, layout, 0);
  REQUIRE(check_instance(good, layout).empty());

  auto bad = good;
  bad.token_ids[0] = layout.pad;
  CHECK_FALSE(check_instance(bad, layout).empty());
  bad = good;
  bad.masked_positions.pop_back();
  CHECK_FALSE(check_instance(bad, layout).empty());
  bad = good;
  bad.token_ids.push_back(layout.pad);
  CHECK_FALSE(check_instance(bad, layout).empty());
  bad = good;
  bad.masked_positions[0] = 0;
  CHECK_FALSE(check_instance(bad, layout).empty());
}

TEST_CASE("write_instances / read_instances") {
  testing::TempDir dir;
  CHECK(write_instances({}, dir / "empty.jsonl") == 0);
  CHECK(testing::read_file(dir / "empty.jsonl").empty());

  const Vocabulary v = letter_vocab();
  PretrainConfig cfg = no_short(16);
  const auto layout = InstanceLayout::from(v, cfg);
  std::string text;
  for (int i = 0; i < 1000; ++i) text += line_of(10 + i % 4) + "\n";
  const auto packed = pack(text, cfg);
  REQUIRE(packed.size() == 1000);
  std::vector<TrainingInstance> masked;
  for (std::size_t i = 0; i < packed.size(); ++i) {
    masked.push_back(apply_mlm_mask(packed[i], cfg, layout, i));
  }
  CHECK(write_instances(masked, dir / "i.jsonl") == 1000);
  const std::string bytes = testing::read_file(dir / "i.jsonl");
  CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 1000);
  const auto back = read_instances(dir / "i.jsonl");
  CHECK(back == masked);
  for (const auto& inst : back) CHECK(check_instance(inst, layout).empty());

  testing::write_file(dir / "bad.jsonl", instance_to_json(masked[0]) + "\n{\"ids\":[1]}\n");
  try {
    read_instances(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("JSON record keys") {
  TrainingInstance inst;
  inst.token_ids = {2, 5, 3, 0};
  inst.attention_len = 3;
  inst.masked_positions = {1};
  inst.masked_labels = {5};
  CHECK(instance_to_json(inst) ==
        R"({"ids":[2,5,3,0],"len":3,"masked_positions":[1],"masked_labels":[5]})");
  inst.split_line = true;
  CHECK(instance_from_json(instance_to_json(inst)) == inst);
}

TEST_CASE("prepare_instances writes shards and metadata verifiable from files alone") {
  testing::TempDir dir;
  const Vocabulary v = letter_vocab();
  PretrainConfig cfg = no_short(16);
  cfg.dupe_factor = 2;
  std::string text;
  for (int i = 0; i < 25; ++i) text += line_of(8) + "\n";
  StringSource src(text);
  const auto summary = prepare_instances(src, v, cfg, dir / "out", 10);
  CHECK(summary.packed == 25);
  CHECK(summary.written == 50);
  REQUIRE(summary.shards.size() == 5);
  CHECK(summary.shards[0].filename() == "instances-16-00000.jsonl");
  CHECK(summary.shards[4].filename() == "instances-16-00004.jsonl");
  CHECK(summary.metadata.filename() == "instances-16.meta.json");

  const auto layout = InstanceLayout::load(summary.metadata);
  std::size_t n = 0;
  for (const auto& shard : summary.shards) {
    for (const auto& inst : read_instances(shard)) {
      CHECK(check_instance(inst, layout).empty());
      ++n;
    }
  }
  CHECK(n == 50);
  // The two copies of a sequence share content but are masked differently.
  const auto first = read_instances(summary.shards[0]);
  CHECK(unmask(first[0]).token_ids == unmask(first[1]).token_ids);
}

TEST_CASE("PretrainConfig validation") {
  PretrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.mask_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.mask_token_rate = 0.7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_seq_len = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.dupe_factor = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("layout needs the structural special tokens") {
  WordFreqs freqs{{"a", 3}};
  VocabConfig cfg;
  cfg.vocab_size = 10;
  cfg.special_tokens = {"[UNK]"};
  const Vocabulary v = train_bpe(freqs, cfg);
  CHECK_THROWS_AS(InstanceLayout::from(v, PretrainConfig{}), ConfigError);
}

}  // TEST_SUITE
