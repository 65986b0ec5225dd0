#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "desm/lexicon.h"
#include "desm/pinyin.h"

namespace desm {

/// Erroneous sentence and its correction; always equal length.
struct ParallelPair {
  std::u32string source;
  std::u32string target;

  size_t error_count() const;
  friend bool operator==(const ParallelPair&, const ParallelPair&) = default;
};

struct CorpusStats {
  size_t sentences = 0;
  size_t error_chars = 0;
};

CorpusStats corpus_stats(const std::vector<ParallelPair>& pairs);

/// `source\ttarget` per line. Blank lines are skipped. Throws MalformedLine
/// or LengthMismatch naming the line.
std::vector<ParallelPair> parse_parallel_tsv(std::istream& in, const std::string& source);
std::vector<ParallelPair> load_parallel_tsv(const std::filesystem::path& path);
void write_parallel_tsv(std::ostream& out, const std::vector<ParallelPair>& pairs);

struct NoiseSpec {
  double error_rate = 0.15;
  /// Share of injected errors drawn from fuzzy (rather than exact) homophones.
  double fuzzy_confusion_prob = 0.3;
  uint64_t seed = 1;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<ParallelPair> pairs;
  /// Positions changed in each pair.
  std::vector<std::vector<size_t>> error_positions;
  /// Characters drawn for corruption that had no homophone at all.
  size_t unsubstitutable = 0;
};

/// Homophone neighbourhoods of every character in a pinyin table.
class HomophoneIndex {
 public:
  HomophoneIndex(const PinyinTable& ptable, const FuzzyClassTable& fuzzy);

  /// Other characters sharing a reading exactly (tone ignored).
  const std::vector<char32_t>& exact(char32_t c) const;
  /// Other characters equivalent only through fuzzy classes.
  const std::vector<char32_t>& fuzzy(char32_t c) const;

 private:
  std::map<char32_t, std::vector<char32_t>> exact_, fuzzy_;
  std::vector<char32_t> none_;
};

/// Targets are concatenations of lexicon words drawn in proportion to their
/// frequency (0 counts as 1), of roughly
/// [min_len, max_len] characters; each character is corrupted with
/// probability `error_rate` by an exact homophone, or with probability
/// `fuzzy_confusion_prob` a fuzzy one. When the drawn kind is unavailable
/// the other kind is used; with neither the character stays unchanged.
SyntheticCorpus generate_synthetic(const Lexicon& lex, const PinyinTable& ptable,
                                   size_t n_sentences, size_t min_len, size_t max_len,
                                   const NoiseSpec& noise);

/// A made-up but well-formed inventory for experiments: `n_chars` CJK code
/// points with readings spread over a pool of syllables that contains fuzzy
/// pairs, and `n_words` distinct two-character words with Zipfian
/// frequencies (100000 / rank).
struct SyntheticInventory {
  PinyinTable ptable;
  std::vector<RawWord> words;
};

SyntheticInventory make_synthetic_inventory(size_t n_chars, size_t n_words,
                                            size_t n_syllables, uint64_t seed);

}  // namespace desm
