#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace desm {

/// One toneless-or-toned Mandarin syllable split into initial and final.
/// The split is orthographic: `initial + final` is the written syllable.
struct PinyinSyllable {
  std::string initial;  // empty for zero-initial syllables
  std::string final;
  int tone = 0;  // 0 = neutral/unspecified

  std::string toneless() const { return initial + final; }
  std::string render() const;

  /// Tone-insensitive equality, the only comparison used for matching.
  bool same_sound(const PinyinSyllable& o) const {
    return initial == o.initial && final == o.final;
  }
  friend bool operator==(const PinyinSyllable&, const PinyinSyllable&) = default;
};

/// Canonical (initial, final) after fuzzy-class normalization. Not
/// necessarily a legal syllable (e.g. h~f can produce "fong").
struct SyllableKey {
  std::string initial;
  std::string final;

  std::string render() const { return initial + final; }
  auto operator<=>(const SyllableKey&) const = default;
};

/// Parses "zhang", "zhang1", "lv3". Longest initial wins ("zh" before "z").
/// Throws InvalidSyllable for anything outside the closed syllable set.
PinyinSyllable parse_syllable(std::string_view s);

bool is_valid_syllable(std::string_view toneless);
bool is_initial(std::string_view s);
bool is_final(std::string_view s);

/// The closed set of legal toneless syllables, sorted.
std::span<const std::string_view> all_syllables();
std::span<const std::string_view> all_initials();
std::span<const std::string_view> all_finals();

/// Partition of initials and of finals into fuzzy-equivalence classes.
/// Symbols not mentioned in any class are singletons.
class FuzzyClassTable {
 public:
  /// No fuzzy merging at all.
  FuzzyClassTable() = default;

  /// z/zh c/ch s/sh l/n f/h and an/ang en/eng in/ing.
  static FuzzyClassTable defaults();

  /// One class per line, members separated by spaces. Blank lines and
  /// lines starting with '#' are ignored. A class mixes no initials with
  /// finals, and a symbol may appear in at most one class.
  static FuzzyClassTable parse(std::istream& in, const std::string& source);
  static FuzzyClassTable load(const std::filesystem::path& path);

  /// Adds a class. Throws DataError if it breaks the partition.
  void add_class(const std::vector<std::string>& members);

  /// Class representative (lexicographically smallest member).
  const std::string& initial_rep(const std::string& initial) const;
  const std::string& final_rep(const std::string& final) const;

  /// Non-singleton classes, each sorted.
  std::vector<std::vector<std::string>> initial_classes() const;
  std::vector<std::vector<std::string>> final_classes() const;

 private:
  std::map<std::string, std::string> initial_rep_;
  std::map<std::string, std::string> final_rep_;
};

SyllableKey fuzzy_key(const PinyinSyllable& s, const FuzzyClassTable& t);

/// Applies the class representatives to an existing key.
SyllableKey canonicalize(const SyllableKey& k, const FuzzyClassTable& t);

bool syllables_equivalent(const PinyinSyllable& a, const PinyinSyllable& b,
                          const FuzzyClassTable& t);

/// Character -> readings. Polyphones keep every distinct reading in file
/// order; matching treats them as a union.
class PinyinTable {
 public:
  /// TSV `字\tzi4`, one line per (character, reading).
  static PinyinTable parse(std::istream& in, const std::string& source);
  static PinyinTable load(const std::filesystem::path& path);

  void add(char32_t ch, PinyinSyllable reading);

  /// Empty span if the character has no reading.
  std::span<const PinyinSyllable> readings(char32_t ch) const;
  bool contains(char32_t ch) const { return table_.count(ch) != 0; }
  size_t size() const { return table_.size(); }

  const std::map<char32_t, std::vector<PinyinSyllable>>& entries() const {
    return table_;
  }

  void write(std::ostream& out) const;

 private:
  std::map<char32_t, std::vector<PinyinSyllable>> table_;
};

}  // namespace desm
