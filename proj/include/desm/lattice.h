#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "desm/lexicon.h"
#include "desm/pinyin.h"

namespace desm {

enum class Provenance : uint8_t { kExact = 0, kPinyinExact = 1, kPinyinFuzzy = 2 };
enum class Direction : uint8_t { kForward = 0, kBackward = 1, kNone = 2 };

std::string_view to_string(Provenance p);
std::string_view to_string(Direction d);

struct MatchCandidate {
  WordId word_id = 0;
  size_t start = 0;  // inclusive
  size_t end = 0;    // inclusive
  Provenance provenance = Provenance::kExact;
  Direction direction = Direction::kNone;
  friend bool operator==(const MatchCandidate&, const MatchCandidate&) = default;
};

/// Which candidate sources feed the lattice.
enum class LatticeMode : uint8_t {
  kNone,      // no candidates at all
  kTrieOnly,  // exact trie matches only
  kDesm,      // exact matches plus bidirectional pinyin 2-gram matches
};

std::string_view to_string(LatticeMode m);
LatticeMode parse_lattice_mode(std::string_view s);

/// Per-character word candidates for one sentence.
struct CharWordLattice {
  std::u32string sentence;
  std::vector<std::vector<MatchCandidate>> per_char;
  std::vector<bool> suspect;
};

inline constexpr size_t kDefaultMMax = 5;

/// Position i is suspect iff no exact match of length >= 2 covers it.
std::vector<bool> mark_suspects(const Lexicon& lex, std::u32string_view sentence);

/// Exact candidates everywhere; for every adjacent pair touching a suspect
/// position, fuzzy pinyin 2-gram candidates attached to both positions.
/// Per position: deduplicated by word id (best provenance kept), ranked
/// EXACT > PINYIN_EXACT > PINYIN_FUZZY, then frequency desc, then id, and
/// truncated to m_max.
CharWordLattice build_lattice(const Lexicon& lex, const PinyinTable& ptable,
                              std::u32string_view sentence, size_t m_max,
                              LatticeMode mode = LatticeMode::kDesm);

/// Word ids as seen by the model: 0 = UNK, 1 = PAD, lexicon id + 2 otherwise.
inline constexpr int32_t kUnkId = 0;
inline constexpr int32_t kPadId = 1;
inline constexpr int32_t kFirstRealId = 2;

/// Row-major [n x m_max] id matrix with a matching 0/1 mask.
struct LatticeFeatures {
  size_t n = 0;
  size_t m_max = 0;
  std::vector<int32_t> ids;
  std::vector<uint8_t> mask;

  int32_t id(size_t i, size_t j) const { return ids[i * m_max + j]; }
  bool real(size_t i, size_t j) const { return mask[i * m_max + j] != 0; }
};

LatticeFeatures lattice_to_feature_ids(const CharWordLattice& lat, size_t m_max);

/// One JSON object per position, newline-terminated.
std::string lattice_to_jsonl(const CharWordLattice& lat, const Lexicon& lex);

}  // namespace desm
