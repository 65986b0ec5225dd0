#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "desm/pinyin.h"

namespace desm {

using WordId = uint32_t;

struct WordEntry {
  WordId word_id = 0;
  std::u32string surface;
  /// Readings per character; every polyphonic reading is kept.
  std::vector<std::vector<PinyinSyllable>> pinyin;
  uint32_t frequency = 1;
};

/// An exact dictionary hit covering sentence[start..end] (inclusive).
struct WordSpan {
  size_t start = 0;
  size_t end = 0;
  WordId word_id = 0;
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

struct RawWord {
  std::u32string surface;
  uint32_t frequency = 1;
};

inline constexpr size_t kMaxWordLength = 4;
inline constexpr int kLexiconFormatVersion = 1;

/// Character trie for exact matching plus an inverted index from fuzzy
/// pinyin 2-grams to two-character words. Immutable once built.
class Lexicon {
 public:
  using BigramKey = std::pair<SyllableKey, SyllableKey>;

  Lexicon() = default;

  /// Word ids follow input order. Throws MissingPinyin, WordTooLong, or
  /// DataError on duplicates and empty surfaces.
  static Lexicon build(const std::vector<RawWord>& words,
                       const PinyinTable& ptable, const FuzzyClassTable& fuzzy);

  /// Word file: UTF-8 `surface[\tfrequency]` per line.
  static std::vector<RawWord> read_word_file(const std::filesystem::path& path);
  static std::vector<RawWord> parse_word_file(std::istream& in,
                                              const std::string& source);

  static Lexicon build_from_file(const std::filesystem::path& word_file,
                                 const PinyinTable& ptable,
                                 const FuzzyClassTable& fuzzy);

  const std::vector<WordEntry>& entries() const { return entries_; }
  const WordEntry& entry(WordId id) const { return entries_.at(id); }
  size_t size() const { return entries_.size(); }
  const FuzzyClassTable& fuzzy() const { return fuzzy_; }

  std::optional<WordId> find(std::u32string_view surface) const;

  /// Every span equal to a dictionary word, sorted by (start, end).
  std::vector<WordSpan> trie_match_all(std::u32string_view sentence) const;

  /// Two-character words whose pinyin is fuzzy-equivalent to (a, b) at both
  /// positions, by descending frequency then word id.
  std::vector<WordId> pinyin_2gram_lookup(const PinyinSyllable& a,
                                          const PinyinSyllable& b) const;
  std::vector<WordId> lookup_key(const BigramKey& key) const;

  const std::map<BigramKey, std::vector<WordId>>& pinyin_index() const {
    return pinyin_index_;
  }

  /// Versioned JSON with both indexes. Output is byte-deterministic.
  std::string serialize() const;
  /// Validates magic, version, and that stored indexes match the entries.
  static Lexicon deserialize(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static Lexicon load(const std::filesystem::path& path);

 private:
  struct TrieNode {
    std::map<char32_t, uint32_t> children;
    int64_t word = -1;
  };

  void index_entries();

  std::vector<WordEntry> entries_;
  std::vector<TrieNode> trie_{TrieNode{}};
  std::map<BigramKey, std::vector<WordId>> pinyin_index_;
  FuzzyClassTable fuzzy_;
};

}  // namespace desm
