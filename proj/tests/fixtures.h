#pragma once

// Shared test fixtures: the running 参加/禅家 example and random instances.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "desm/lexicon.h"
#include "desm/pinyin.h"
#include "desm/text.h"

namespace desm::testing {

inline std::u32string u32(std::string_view s) { return decode_utf8(s); }

inline PinyinTable demo_pinyin_table() {
  PinyinTable t;
  const std::vector<std::pair<const char*, const char*>> rows = {
      {"我", "wo3"},  {"参", "can1"}, {"加", "jia1"}, {"家", "jia1"},
      {"禅", "chan2"}, {"会", "hui4"}, {"议", "yi4"},  {"佳", "jia1"},
      {"惨", "can3"}, {"蚕", "can2"}, {"嘉", "jia1"}, {"夹", "jia2"},
      {"灿", "can4"}, {"产", "chan3"}, {"馋", "chan2"}, {"婵", "chan2"},
      {"铲", "chan3"}, {"颤", "chan4"}, {"你", "ni3"},  {"好", "hao3"},
  };
  for (auto [c, r] : rows) t.add(u32(c)[0], parse_syllable(r));
  // 会 is polyphonic.
  t.add(u32("会")[0], parse_syllable("kuai4"));
  return t;
}

inline std::vector<RawWord> words(std::initializer_list<const char*> ws) {
  std::vector<RawWord> out;
  for (const char* w : ws) out.push_back({u32(w), 1});
  return out;
}

/// A random world: `n_chars` characters from the CJK block with readings
/// drawn from a small syllable pool so homophones and fuzzy pairs are common.
struct RandomWorld {
  PinyinTable ptable;
  std::vector<char32_t> chars;
};

inline RandomWorld random_world(std::mt19937_64& rng, size_t n_chars) {
  static const char* pool[] = {"can", "chan", "jia", "zi",  "zhi", "si",
                               "shi", "lan", "nan", "lang", "fei", "hei",
                               "yin", "ying", "wo", "ta"};
  RandomWorld w;
  std::uniform_int_distribution<size_t> pick(0, std::size(pool) - 1);
  std::uniform_int_distribution<int> tone(0, 4);
  std::bernoulli_distribution poly(0.15);
  for (size_t i = 0; i < n_chars; ++i) {
    char32_t c = 0x4E00 + static_cast<char32_t>(i * 7 + 3);
    w.chars.push_back(c);
    auto s = parse_syllable(pool[pick(rng)]);
    s.tone = tone(rng);
    w.ptable.add(c, s);
    if (poly(rng)) w.ptable.add(c, parse_syllable(pool[pick(rng)]));
  }
  return w;
}

inline std::vector<RawWord> random_words(std::mt19937_64& rng,
                                         const RandomWorld& w, size_t count) {
  std::uniform_int_distribution<size_t> len(1, 4);
  std::uniform_int_distribution<size_t> ch(0, w.chars.size() - 1);
  std::uniform_int_distribution<uint32_t> freq(1, 5);
  std::bernoulli_distribution two(0.6);
  std::vector<RawWord> out;
  std::set<std::u32string> seen;
  for (size_t tries = 0; out.size() < count && tries < count * 20; ++tries) {
    size_t l = two(rng) ? 2 : len(rng);
    std::u32string s;
    for (size_t k = 0; k < l; ++k) s.push_back(w.chars[ch(rng)]);
    if (seen.insert(s).second) out.push_back({s, freq(rng)});
  }
  return out;
}

/// Sentences mix lexicon words with random characters so matches are common.
inline std::u32string random_sentence(std::mt19937_64& rng, const RandomWorld& w,
                                      const std::vector<RawWord>& lex_words,
                                      size_t max_len) {
  std::uniform_int_distribution<size_t> len(0, max_len);
  std::uniform_int_distribution<size_t> ch(0, w.chars.size() - 1);
  std::bernoulli_distribution use_word(0.5);
  size_t target = len(rng);
  std::u32string s;
  while (s.size() < target) {
    if (!lex_words.empty() && use_word(rng)) {
      std::uniform_int_distribution<size_t> wi(0, lex_words.size() - 1);
      s += lex_words[wi(rng)].surface;
    } else {
      s.push_back(w.chars[ch(rng)]);
    }
  }
  s.resize(target);
  return s;
}

}  // namespace desm::testing
