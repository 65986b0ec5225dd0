#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <random>

#include "desm/lattice.h"
#include "fixtures.h"
#include "oracles.h"

using namespace desm;
using namespace desm::testing;

namespace {

Lexicon demo(std::initializer_list<const char*> ws) {
  return Lexicon::build(words(ws), demo_pinyin_table(), FuzzyClassTable::defaults());
}

bool has_word(const std::vector<MatchCandidate>& cs, const Lexicon& lex, const char* w) {
  auto id = lex.find(u32(w));
  for (const auto& c : cs) {
    if (id && c.word_id == *id) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("mark_suspects uses multi-character coverage") {
  auto lex = demo({"参加", "会议"});
  auto s = mark_suspects(lex, u32("我参家会议"));
  CHECK(s == std::vector<bool>{true, true, true, false, false});
  CHECK(mark_suspects(lex, u32("参加会议")) == std::vector<bool>(4, false));
  auto single = demo({"参"});
  CHECK(mark_suspects(single, u32("参")) == std::vector<bool>{true});
  CHECK(mark_suspects(lex, u32("")).empty());
}

TEST_CASE("running example: error reduction and amplification") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "禅家"});
  auto lat = build_lattice(lex, pt, u32("参家"), kDefaultMMax);
  REQUIRE(lat.per_char.size() == 2);
  CHECK(has_word(lat.per_char[0], lex, "参加"));
  CHECK(has_word(lat.per_char[1], lex, "参加"));
  CHECK(has_word(lat.per_char[1], lex, "禅家"));

  // 参加 sounds identical to 参家; 禅家 only under the c~ch class.
  const auto& p1 = lat.per_char[1];
  REQUIRE(p1.size() == 2);
  CHECK(p1[0].word_id == 0);
  CHECK(p1[0].provenance == Provenance::kPinyinExact);
  CHECK(p1[0].direction == Direction::kForward);
  CHECK(p1[1].word_id == 1);
  CHECK(p1[1].provenance == Provenance::kPinyinFuzzy);
  CHECK(p1[1].start == 0);
  CHECK(p1[1].end == 1);
}

TEST_CASE("fully correct sentence has only exact candidates") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "禅家", "会议"});
  auto lat = build_lattice(lex, pt, u32("参加会议"), kDefaultMMax);
  for (const auto& cs : lat.per_char) {
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].provenance == Provenance::kExact);
  }
}

TEST_CASE("characters without readings contribute nothing") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "禅家"});
  auto lat = build_lattice(lex, pt, u32("X家"), kDefaultMMax);
  CHECK(lat.per_char[0].empty());
  CHECK(lat.per_char[1].empty());
  CHECK(build_lattice(lex, pt, u32(""), kDefaultMMax).per_char.empty());
}

TEST_CASE("trie-only mode suppresses pinyin candidates") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "禅家", "会议"});
  auto lat = build_lattice(lex, pt, u32("参家会议"), kDefaultMMax, LatticeMode::kTrieOnly);
  CHECK(lat.per_char[0].empty());
  CHECK(lat.per_char[1].empty());
  CHECK(lat.per_char[2].size() == 1);
  auto none = build_lattice(lex, pt, u32("参家会议"), kDefaultMMax, LatticeMode::kNone);
  for (const auto& cs : none.per_char) CHECK(cs.empty());
}

TEST_CASE("feature ids pad and truncate") {
  auto pt = demo_pinyin_table();
  // Seven words that all sound like can-jia under fuzzy matching.
  auto lex = demo({"参加", "禅家", "惨佳", "蚕嘉", "灿夹", "馋家", "婵佳"});
  auto lat = build_lattice(lex, pt, u32("参家"), 5);
  auto full = build_lattice(lex, pt, u32("参家"), 100);
  REQUIRE(full.per_char[0].size() == 7);
  REQUIRE(lat.per_char[0].size() == 5);
  for (size_t j = 0; j < 5; ++j) CHECK(lat.per_char[0][j] == full.per_char[0][j]);
  // Exact-sounding words (can*, jia*) rank ahead of the fuzzy chan* ones.
  std::vector<WordId> order;
  for (const auto& c : full.per_char[0]) order.push_back(c.word_id);
  CHECK(order == std::vector<WordId>{0, 2, 3, 4, 1, 5, 6});

  auto f = lattice_to_feature_ids(lat, 5);
  CHECK(f.n == 2);
  for (size_t j = 0; j < 5; ++j) {
    CHECK(f.real(0, j));
    CHECK(f.id(0, j) == static_cast<int32_t>(order[j]) + kFirstRealId);
  }

  CharWordLattice two;
  two.sentence = u32("参家");
  two.per_char = {{{0, 0, 1, Provenance::kExact, Direction::kNone},
                   {1, 0, 1, Provenance::kExact, Direction::kNone}},
                  {}};
  auto g = lattice_to_feature_ids(two, 5);
  CHECK(std::vector<int32_t>(g.ids.begin(), g.ids.begin() + 5) ==
        std::vector<int32_t>{2, 3, kPadId, kPadId, kPadId});
  CHECK(std::vector<uint8_t>(g.mask.begin(), g.mask.begin() + 5) ==
        std::vector<uint8_t>{1, 1, 0, 0, 0});
  CHECK(std::vector<uint8_t>(g.mask.begin() + 5, g.mask.end()) ==
        std::vector<uint8_t>(5, 0));
}

TEST_CASE("lattice JSON lines") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "禅家"});
  auto text = lattice_to_jsonl(build_lattice(lex, pt, u32("参家"), 5), lex);
  auto nl = text.find('\n');
  auto first = nlohmann::json::parse(text.substr(0, nl));
  CHECK(first["pos"] == 0);
  CHECK(first["char"] == "参");
  CHECK(first["suspect"] == true);
  CHECK(first["candidates"][0]["word"] == "参加");
  CHECK(first["candidates"][0]["span"] == nlohmann::json::array({0, 1}));
  CHECK(first["candidates"][0]["provenance"] == "PINYIN_EXACT");
  CHECK(first["candidates"][1]["word"] == "禅家");
}

TEST_CASE("random instances equal the brute-force lattice") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    auto world = random_world(rng, 30);
    auto ws = random_words(rng, world, 1 + rng() % 200);
    auto lex = Lexicon::build(ws, world.ptable, FuzzyClassTable::defaults());
    auto s = random_sentence(rng, world, ws, 30);
    size_t m_max = 1 + rng() % 8;
    auto a = build_lattice(lex, world.ptable, s, m_max);
    auto b = brute_lattice(lex, world.ptable, s, m_max);
    CHECK(a.suspect == b.suspect);
    CHECK(a.per_char == b.per_char);
    auto again = build_lattice(lex, world.ptable, s, m_max);
    CHECK(again.per_char == a.per_char);
    for (size_t i = 0; i < a.per_char.size(); ++i) {
      for (const auto& c : a.per_char[i]) {
        CHECK(c.start <= i);
        CHECK(i <= c.end);
        const auto& e = lex.entry(c.word_id);
        if (c.provenance == Provenance::kExact) {
          CHECK(e.surface == s.substr(c.start, c.end - c.start + 1));
        } else {
          CHECK(e.surface.size() == 2);
          CHECK(c.end == c.start + 1);
        }
      }
    }
  }
}

TEST_CASE("error reduction: an isolated lexicon word tops its positions") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto world = random_world(rng, 40);
    auto ws = random_words(rng, world, 60);
    auto lex = Lexicon::build(ws, world.ptable, FuzzyClassTable::defaults());
    const auto& w = ws[rng() % ws.size()];
    // Embed the word between characters that never occur in the lexicon.
    std::u32string s = U"　" + w.surface + U"、";
    auto lat = build_lattice(lex, world.ptable, s, kDefaultMMax);
    auto id = *lex.find(w.surface);
    for (size_t i = 1; i <= w.surface.size(); ++i) {
      REQUIRE_FALSE(lat.per_char[i].empty());
      CHECK(lat.per_char[i][0].provenance == Provenance::kExact);
      bool found = false;
      for (const auto& c : lat.per_char[i]) {
        found = found || (c.word_id == id && c.provenance == Provenance::kExact);
      }
      CHECK(found);
      // Only sub-words of w can also be exact here; a longer exact word would
      // need characters outside w.
      bool top_is_w_or_subword = false;
      const auto& top = lex.entry(lat.per_char[i][0].word_id).surface;
      top_is_w_or_subword = w.surface.find(top) != std::u32string::npos;
      CHECK(top_is_w_or_subword);
    }
  }
}

TEST_CASE("error amplification: a fuzzy homophone keeps the original word") {
  auto pt = demo_pinyin_table();
  auto lex = demo({"参加", "会议"});
  // 婵 (chan) replaces 参 (can): both positions still see 参加.
  auto lat = build_lattice(lex, pt, u32("我婵加会议"), kDefaultMMax);
  CHECK(has_word(lat.per_char[1], lex, "参加"));
  CHECK(has_word(lat.per_char[2], lex, "参加"));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto world = random_world(rng, 30);
    auto ws = random_words(rng, world, 40);
    auto lex2 = Lexicon::build(ws, world.ptable, FuzzyClassTable::defaults());
    std::vector<const WordEntry*> two;
    for (const auto& e : lex2.entries()) {
      if (e.surface.size() == 2) two.push_back(&e);
    }
    if (two.empty()) continue;
    const auto& e = *two[rng() % two.size()];
    size_t pos = rng() % 2;
    // Any other character sharing a fuzzy reading.
    std::vector<char32_t> subs;
    for (char32_t c : world.chars) {
      if (c == e.surface[pos]) continue;
      for (const auto& r : world.ptable.readings(c)) {
        for (const auto& x : e.pinyin[pos]) {
          if (syllables_equivalent(r, x, lex2.fuzzy())) subs.push_back(c);
        }
      }
    }
    if (subs.empty()) continue;
    auto s = e.surface;
    s[pos] = subs[rng() % subs.size()];
    if (lex2.find(s)) continue;  // the substitute happens to be a word itself
    auto lat2 = build_lattice(lex2, world.ptable, s, 1000);
    for (size_t i = 0; i < 2; ++i) {
      bool found = false;
      for (const auto& c : lat2.per_char[i]) found = found || c.word_id == e.word_id;
      CHECK(found);
    }
  }
}
