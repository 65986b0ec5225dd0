#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "cli_harness.h"
#include "desm/text.h"
#include "eval_fixture.h"

using namespace desm;
using namespace desm::testing;

namespace {

const std::string kTables = " --pinyin-table '" + CliHarness::demo("pinyin.tsv") + "'";

std::string lexicon_args(const CliHarness& h) {
  return " --lexicon '" + h.path("demo.lex").string() + "'" + kTables;
}

void build_lexicon(const CliHarness& h) {
  auto r = h.run("build-lexicon '" + CliHarness::demo("words.tsv") + "'" + kTables +
                 " --fuzzy-table '" + CliHarness::demo("fuzzy.txt") + "' --out demo.lex");
  REQUIRE(r.code == 0);
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("match on the running example") {
  CliHarness h("match");
  build_lexicon(h);
  auto r = h.run("match 参家" + lexicon_args(h));
  REQUIRE(r.code == 0);
  auto recs = lines(r.out);
  REQUIRE(recs.size() == 2);
  for (size_t pos = 0; pos < 2; ++pos) {
    auto j = nlohmann::json::parse(recs[pos]);
    CHECK(j["pos"] == pos);
    std::set<std::string> words;
    for (const auto& c : j["candidates"]) words.insert(c["word"].get<std::string>());
    CHECK(words.count("参加") == 1);
    CHECK(words.count("禅家") == 1);
  }
}

TEST_CASE("exit codes") {
  CliHarness h("codes");
  CHECK(h.run("").code == 1);
  CHECK(h.run("no-such-command").code == 1);
  CHECK(h.run("match x --lexicon missing.lex" + kTables).code == 1);
  CHECK(h.run("match x --mode bogus --lexicon x" + kTables).code == 1);
  write_file(h.path("bad.lex"), "{}");
  CHECK(h.run("match x --lexicon bad.lex" + kTables).code == 2);
  write_file(h.path("bad.tsv"), "a\tbc\n");
  write_file(h.path("p.txt"), "a\n");
  CHECK(h.run("evaluate --test bad.tsv --predictions p.txt").code == 2);
  CHECK(h.stderr_text().find("line 1") != std::string::npos);
  CHECK(h.run("--help").code == 0);
}

TEST_CASE("evaluate matches the scoring oracle on the fixture") {
  CliHarness h("eval");
  std::string test, pred;
  for (const auto& r : eval_fixture_rows()) {
    test += std::string(r.source) + "\t" + r.gold + "\n";
    pred += std::string(r.prediction) + "\n";
  }
  write_file(h.path("test.tsv"), test);
  write_file(h.path("pred.txt"), pred);
  auto r = h.run("evaluate --test test.tsv --predictions pred.txt --format json");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  auto oracle = score(eval_fixture());
  CHECK(j["detection"]["precision"].get<double>() == oracle.detection.precision);
  CHECK(j["detection"]["recall"].get<double>() == oracle.detection.recall);
  CHECK(j["correction"]["precision"].get<double>() == oracle.correction.precision);
  CHECK(j["correction"]["recall"].get<double>() == oracle.correction.recall);
  CHECK(j["correction"]["f1"].get<double>() == oracle.correction.f1);

  // Sources as predictions: nothing detected, precision undefined.
  write_file(h.path("src.txt"), "我门参家会\n明天开汇以\n");
  CHECK(h.run("evaluate --test test.tsv --predictions src.txt").code == 3);
  CHECK(h.run("evaluate --test test.tsv --predictions src.txt --allow-undefined").code == 0);
  write_file(h.path("short.txt"), "我门参家会\n");
  CHECK(h.run("evaluate --test test.tsv --predictions short.txt").code == 2);
}

TEST_CASE("copy-dominant checkpoint corrects nothing and keeps shape") {
  CliHarness h("copy");
  build_lexicon(h);
  write_file(h.path("cfg.json"),
             R"({"d_c": 8, "d_w": 8, "layers": 1, "epochs": 0, "copy_bias_init": 30, "max_len": 32})");
  auto t = h.run("train --corpus '" + CliHarness::demo("corpus.tsv") + "'" + lexicon_args(h) +
                 " --config cfg.json --checkpoint m.ckpt");
  REQUIRE(t.code == 0);
  std::string input = "我们今天去参家会议\nabc 你好\n\n今天开惠\n";
  write_file(h.path("in.txt"), input);
  auto r = h.run("correct --checkpoint m.ckpt --input in.txt" + lexicon_args(h));
  REQUIRE(r.code == 0);
  CHECK(r.out == input);

  auto j = h.run("correct --checkpoint m.ckpt --format json --top-k 2 --input in.txt" +
                 lexicon_args(h));
  REQUIRE(j.code == 0);
  auto recs = lines(j.out);
  REQUIRE(recs.size() == 4);
  auto first = nlohmann::json::parse(recs[0]);
  CHECK(first["output"] == "我们今天去参家会议");
  CHECK(first["omega"].size() == 9);
  CHECK(first["top"][0].size() == 2);

  write_file(h.path("bad.txt"), "ok\n\xff\n");
  CHECK(h.run("correct --checkpoint m.ckpt --input bad.txt" + lexicon_args(h)).code == 2);
}

TEST_CASE("train rejects unknown config keys") {
  CliHarness h("cfg");
  build_lexicon(h);
  write_file(h.path("cfg.json"), R"({"learning_rate": 0.1})");
  auto r = h.run("train --corpus '" + CliHarness::demo("corpus.tsv") + "'" + lexicon_args(h) +
                 " --config cfg.json --checkpoint m.ckpt");
  CHECK(r.code == 2);
  CHECK(h.stderr_text().find("learning_rate") != std::string::npos);
}
