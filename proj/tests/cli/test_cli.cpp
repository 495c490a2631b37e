#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run cforge(const testing::TempDir& dir, const std::string& args,
           const std::string& env_prefix = "") {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && " + env_prefix + " '" +
                          CFORGE_BIN + "' " + args + " > '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  return r;
}

const char* kRaw =
    "Aceasta este o propoziţie foarte lungă şi a- mi place mult de tot.\n"
    "scurt\n"
    "Viteza maximă este de 50 km/ h pe drumurile naţionale din oraş.\n";

std::string fixture_corpus() {
  std::string s;
  const char* lines[] = {
      "Cinci bicicliști au plecat din Craiova spre Șopârlița în dimineața aceea.",
      "Ana are mere și pere, iar Ion are o mașină roșie foarte frumoasă.",
      "Vremea a fost frumoasă toată săptămâna, cu soare și puțin vânt.",
      "Orașul Craiova este reședința județului Dolj din regiunea Oltenia.",
      "Copiii s-au jucat în parc până seara târziu, apoi au mers acasă.",
      "Biblioteca județeană a primit o donație importantă de cărți vechi."};
  for (int i = 0; i < 60; ++i) s += std::string(lines[i % 6]) + "\n";
  return s;
}

}  // namespace

TEST_CASE("clean on a 3-line fixture") {
  testing::TempDir dir;
  testing::write_file(dir / "raw.txt", kRaw);
  const Run r = cforge(dir, "clean --in raw.txt --out clean.txt");
  CHECK(r.status == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report["lines_in"] == 3);
  CHECK(report["lines_out"] == 2);
  CHECK(r.err.find("config digest") != std::string::npos);
  CHECK(r.err.find("seed") != std::string::npos);
  const std::string cleaned = testing::read_file(dir / "clean.txt");
  CHECK(cleaned.find("a-mi") != std::string::npos);
  CHECK(cleaned.find("km/h") != std::string::npos);
  CHECK(cleaned.find("ș") != std::string::npos);
}

TEST_CASE("clean reads stdin and writes stdout, report to stderr") {
  testing::TempDir dir;
  testing::write_file(dir / "raw.txt", kRaw);
  const Run r = cforge(dir, "clean --in - --out - < raw.txt");
  CHECK(r.status == 0);
  CHECK(r.out.find("a-mi") != std::string::npos);
  CHECK(r.err.find("\"lines_in\":3") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  testing::TempDir dir;
  CHECK(cforge(dir, "clean --in missing.txt --out x.txt").status == 2);
  CHECK(cforge(dir, "clean --in x --bogus-flag").status == 2);
  CHECK(cforge(dir, "frobnicate").status == 2);
  CHECK(cforge(dir, "").status == 2);
  CHECK(cforge(dir, "measure --vocab nope.txt --in nope.txt").status == 2);
  testing::write_file(dir / "bad.ini", "[clean]\nmin_line_chars = many\n");
  testing::write_file(dir / "raw.txt", kRaw);
  CHECK(cforge(dir, "--config bad.ini clean --in raw.txt").status == 2);
}

TEST_CASE("train-vocab with a budget below specials plus alphabet exits 1") {
  testing::TempDir dir;
  testing::write_file(dir / "corpus.txt", fixture_corpus());
  const Run r = cforge(dir, "train-vocab --in corpus.txt --size 10 --out v.txt");
  CHECK(r.status == 1);
  CHECK(r.err.find("configuration error") != std::string::npos);
}

TEST_CASE("precedence: file < env < flags") {
  testing::TempDir dir;
  testing::write_file(dir / "raw.txt", kRaw);
  testing::write_file(dir / "run.ini", "[clean]\nmin_line_chars = 500\n");
  // File alone drops everything.
  auto r = cforge(dir, "--config run.ini clean --in raw.txt --out a.txt");
  CHECK(nlohmann::json::parse(r.out)["lines_out"] == 0);
  // Env beats the file.
  r = cforge(dir, "--config run.ini clean --in raw.txt --out b.txt",
             "CFORGE_CLEAN_MIN_LINE_CHARS=5");
  CHECK(nlohmann::json::parse(r.out)["lines_out"] == 3);
  // Flags beat env.
  r = cforge(dir, "--config run.ini clean --in raw.txt --out c.txt --min-chars 20",
             "CFORGE_CLEAN_MIN_LINE_CHARS=5");
  CHECK(nlohmann::json::parse(r.out)["lines_out"] == 2);
}

TEST_CASE("documented pipeline end to end, twice, byte-identical") {
  testing::TempDir dir;
  testing::write_file(dir / "raw_a.txt", fixture_corpus() + kRaw);
  testing::write_file(dir / "raw_b.txt", fixture_corpus());
  testing::write_file(dir / "run.ini",
                      "[pipeline]\nseed = 11\ndev_lines = 20\n"
                      "[vocab]\nsize = 300\n"
                      "[pretrain]\nmax_seq_len = 32\ninstances_per_shard = 10\n");

  auto pipeline = [&](const std::string& out) {
    const std::string cfg = "--config run.ini --output-dir " + out + " ";
    REQUIRE(cforge(dir, cfg + "clean --in raw_a.txt --out " + out + "/a.txt").status == 0);
    REQUIRE(cforge(dir, cfg + "clean --in raw_b.txt --out " + out + "/b.txt").status == 0);
    const Run stats = cforge(dir, cfg + "stats --in a=" + out + "/a.txt --in b=" + out + "/b.txt");
    REQUIRE(stats.status == 0);
    CHECK(nlohmann::json::parse(stats.out)["total"]["lines"] == 122);
    REQUIRE(cforge(dir, cfg + "sample-dev --in a=" + out + "/a.txt --in b=" + out +
                            "/b.txt --train-out " + out + "/train.txt")
                .status == 0);
    REQUIRE(cforge(dir, cfg + "train-vocab --in " + out + "/train.txt").status == 0);
    const Run m = cforge(dir, cfg + "measure");
    REQUIRE(m.status == 0);
    const auto metrics = nlohmann::json::parse(m.out);
    CHECK(metrics["tokens_per_word"].get<double>() >= 1.0);
    CHECK(metrics["words_measured"].get<int>() > 0);
    REQUIRE(cforge(dir, cfg + "prep --in " + out + "/train.txt").status == 0);
    const Run t = cforge(dir, cfg + "tokenize --in " + out + "/b.txt --vocab " + out +
                                  "/vocab.txt");
    REQUIRE(t.status == 0);
    CHECK(std::count(t.out.begin(), t.out.end(), '\n') == 60);
  };
  pipeline("run1");
  pipeline("run2");

  for (const char* artifact :
       {"a.txt", "b.txt", "dev.txt", "dev.manifest.tsv", "train.txt", "vocab.txt",
        "vocab.txt.json", "instances/instances-32.meta.json",
        "instances/instances-32-00000.jsonl"}) {
    const fs::path a = dir / "run1" / artifact;
    const fs::path b = dir / "run2" / artifact;
    REQUIRE_MESSAGE(fs::exists(a), artifact);
    CHECK_MESSAGE(testing::read_file(a) == testing::read_file(b), artifact);
  }
  const std::string dev = testing::read_file(dir / "run1" / "dev.txt");
  CHECK(std::count(dev.begin(), dev.end(), '\n') == 20);
}

TEST_CASE("measure and tokenize outputs") {
  testing::TempDir dir;
  testing::write_file(dir / "corpus.txt", fixture_corpus());
  REQUIRE(cforge(dir, "train-vocab --in corpus.txt --size 400 --out v.txt").status == 0);
  const Run m = cforge(dir, "measure --vocab v.txt --in corpus.txt");
  CHECK(m.status == 0);
  const auto j = nlohmann::json::parse(m.out);
  CHECK(j["tokens_per_word"].get<double>() >= 1.0);
  CHECK(j.contains("unk_per_word"));
  CHECK(j.contains("words_measured"));

  testing::write_file(dir / "one.txt", "Ana are mere.\n\nCraiova\n");
  const Run t = cforge(dir, "tokenize --vocab v.txt --in one.txt");
  CHECK(t.status == 0);
  CHECK(std::count(t.out.begin(), t.out.end(), '\n') == 3);
  const Run ids = cforge(dir, "tokenize --ids --vocab v.txt --in one.txt");
  CHECK(ids.status == 0);
  CHECK(ids.out.find_first_not_of("0123456789 \n") == std::string::npos);
}
