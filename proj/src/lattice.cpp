#include "desm/lattice.h"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "desm/errors.h"
#include "desm/text.h"

namespace desm {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kExact: return "EXACT";
    case Provenance::kPinyinExact: return "PINYIN_EXACT";
    case Provenance::kPinyinFuzzy: return "PINYIN_FUZZY";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kForward: return "FORWARD";
    case Direction::kBackward: return "BACKWARD";
    case Direction::kNone: return "NONE";
  }
  return "?";
}

std::string_view to_string(LatticeMode m) {
  switch (m) {
    case LatticeMode::kNone: return "none";
    case LatticeMode::kTrieOnly: return "ttm";
    case LatticeMode::kDesm: return "desm";
  }
  return "?";
}

LatticeMode parse_lattice_mode(std::string_view s) {
  if (s == "none") return LatticeMode::kNone;
  if (s == "ttm" || s == "trie") return LatticeMode::kTrieOnly;
  if (s == "desm") return LatticeMode::kDesm;
  throw DataError("unknown lattice mode '" + std::string(s) + "'");
}

std::vector<bool> mark_suspects(const Lexicon& lex, std::u32string_view sentence) {
  std::vector<bool> suspect(sentence.size(), true);
  for (const auto& m : lex.trie_match_all(sentence)) {
    if (m.end == m.start) continue;
    for (size_t i = m.start; i <= m.end; ++i) suspect[i] = false;
  }
  return suspect;
}

namespace {

bool readings_share_sound(std::span<const PinyinSyllable> xs,
                          const std::vector<PinyinSyllable>& ys) {
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      if (x.same_sound(y)) return true;
    }
  }
  return false;
}

// Strict weak order for keeping one candidate per word at a position.
bool better_duplicate(const MatchCandidate& a, const MatchCandidate& b) {
  if (a.provenance != b.provenance) return a.provenance < b.provenance;
  if (a.start != b.start) return a.start < b.start;
  if (a.end != b.end) return a.end < b.end;
  return a.direction < b.direction;
}

}  // namespace

CharWordLattice build_lattice(const Lexicon& lex, const PinyinTable& ptable,
                              std::u32string_view sentence, size_t m_max,
                              LatticeMode mode) {
  const size_t n = sentence.size();
  CharWordLattice lat;
  lat.sentence = std::u32string(sentence);
  lat.per_char.resize(n);
  lat.suspect = mark_suspects(lex, sentence);
  if (mode == LatticeMode::kNone || n == 0) return lat;

  std::vector<std::map<WordId, MatchCandidate>> pool(n);
  auto offer = [&](size_t pos, const MatchCandidate& c) {
    auto [it, inserted] = pool[pos].emplace(c.word_id, c);
    if (!inserted && better_duplicate(c, it->second)) it->second = c;
  };

  for (const auto& m : lex.trie_match_all(sentence)) {
    MatchCandidate c{m.word_id, m.start, m.end, Provenance::kExact, Direction::kNone};
    for (size_t i = m.start; i <= m.end; ++i) offer(i, c);
  }

  if (mode == LatticeMode::kDesm) {
    for (size_t i = 0; i + 1 < n; ++i) {
      if (!lat.suspect[i] && !lat.suspect[i + 1]) continue;
      // A window is FORWARD from its left suspect, else BACKWARD from its right.
      Direction dir = lat.suspect[i] ? Direction::kForward : Direction::kBackward;
      auto left = ptable.readings(sentence[i]);
      auto right = ptable.readings(sentence[i + 1]);
      if (left.empty() || right.empty()) continue;
      std::set<WordId> words;
      for (const auto& a : left) {
        for (const auto& b : right) {
          for (WordId w : lex.pinyin_2gram_lookup(a, b)) words.insert(w);
        }
      }
      for (WordId w : words) {
        const auto& e = lex.entry(w);
        bool exact = readings_share_sound(left, e.pinyin[0]) &&
                     readings_share_sound(right, e.pinyin[1]);
        MatchCandidate c{w, i, i + 1,
                         exact ? Provenance::kPinyinExact : Provenance::kPinyinFuzzy,
                         dir};
        offer(i, c);
        offer(i + 1, c);
      }
    }
  }

  for (size_t i = 0; i < n; ++i) {
    auto& out = lat.per_char[i];
    out.reserve(pool[i].size());
    for (const auto& [id, c] : pool[i]) out.push_back(c);
    std::sort(out.begin(), out.end(), [&](const MatchCandidate& a, const MatchCandidate& b) {
      if (a.provenance != b.provenance) return a.provenance < b.provenance;
      uint32_t fa = lex.entry(a.word_id).frequency;
      uint32_t fb = lex.entry(b.word_id).frequency;
      if (fa != fb) return fa > fb;
      return a.word_id < b.word_id;
    });
    if (out.size() > m_max) out.resize(m_max);
  }
  return lat;
}

LatticeFeatures lattice_to_feature_ids(const CharWordLattice& lat, size_t m_max) {
  LatticeFeatures f;
  f.n = lat.per_char.size();
  f.m_max = m_max;
  f.ids.assign(f.n * m_max, kPadId);
  f.mask.assign(f.n * m_max, 0);
  for (size_t i = 0; i < f.n; ++i) {
    const auto& cands = lat.per_char[i];
    for (size_t j = 0; j < std::min(m_max, cands.size()); ++j) {
      f.ids[i * m_max + j] = static_cast<int32_t>(cands[j].word_id) + kFirstRealId;
      f.mask[i * m_max + j] = 1;
    }
  }
  return f;
}

std::string lattice_to_jsonl(const CharWordLattice& lat, const Lexicon& lex) {
  std::string out;
  for (size_t i = 0; i < lat.per_char.size(); ++i) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : lat.per_char[i]) {
      cands.push_back({{"word", encode_utf8(lex.entry(c.word_id).surface)},
                       {"span", {c.start, c.end}},
                       {"provenance", to_string(c.provenance)},
                       {"direction", to_string(c.direction)}});
    }
    nlohmann::json rec = {{"pos", i},
                          {"char", encode_utf8(lat.sentence[i])},
                          {"suspect", static_cast<bool>(lat.suspect[i])},
                          {"candidates", std::move(cands)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace desm
