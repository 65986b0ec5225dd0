#include "desm/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "desm/errors.h"
#include "desm/random.h"
#include "desm/text.h"

namespace desm {

size_t ParallelPair::error_count() const {
  size_t n = 0;
  for (size_t i = 0; i < source.size() && i < target.size(); ++i) {
    n += source[i] != target[i];
  }
  return n;
}

CorpusStats corpus_stats(const std::vector<ParallelPair>& pairs) {
  CorpusStats s;
  s.sentences = pairs.size();
  for (const auto& p : pairs) s.error_chars += p.error_count();
  return s;
}

std::vector<ParallelPair> parse_parallel_tsv(std::istream& in, const std::string& source) {
  std::vector<ParallelPair> pairs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = strip_cr(line);
    if (trim(text).empty()) continue;
    auto fields = split(text, '\t');
    if (fields.size() != 2) {
      throw MalformedLine(source, line_no, "expected source<TAB>target");
    }
    ParallelPair p;
    try {
      p.source = decode_utf8(fields[0]);
      p.target = decode_utf8(fields[1]);
    } catch (const Utf8Error& e) {
      throw MalformedLine(source, line_no, e.what());
    }
    if (p.source.size() != p.target.size()) throw LengthMismatch(source, line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<ParallelPair> load_parallel_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path.string());
  return parse_parallel_tsv(in, path.string());
}

void write_parallel_tsv(std::ostream& out, const std::vector<ParallelPair>& pairs) {
  for (const auto& p : pairs) {
    out << encode_utf8(p.source) << '\t' << encode_utf8(p.target) << '\n';
  }
}

void NoiseSpec::validate() const {
  auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!ok(error_rate) || !ok(fuzzy_confusion_prob)) {
    throw DataError("noise probabilities must lie in [0, 1]");
  }
}

HomophoneIndex::HomophoneIndex(const PinyinTable& ptable, const FuzzyClassTable& fuzzy) {
  std::map<std::string, std::set<char32_t>> by_sound;
  std::map<SyllableKey, std::set<char32_t>> by_key;
  for (const auto& [c, readings] : ptable.entries()) {
    for (const auto& r : readings) {
      by_sound[r.toneless()].insert(c);
      by_key[fuzzy_key(r, fuzzy)].insert(c);
    }
  }
  for (const auto& [c, readings] : ptable.entries()) {
    std::set<char32_t> ex, fz;
    for (const auto& r : readings) {
      const auto& s = by_sound[r.toneless()];
      ex.insert(s.begin(), s.end());
    }
    for (const auto& r : readings) {
      for (char32_t o : by_key[fuzzy_key(r, fuzzy)]) {
        if (!ex.count(o)) fz.insert(o);
      }
    }
    ex.erase(c);
    exact_[c] = {ex.begin(), ex.end()};
    fuzzy_[c] = {fz.begin(), fz.end()};
  }
}

const std::vector<char32_t>& HomophoneIndex::exact(char32_t c) const {
  auto it = exact_.find(c);
  return it == exact_.end() ? none_ : it->second;
}

const std::vector<char32_t>& HomophoneIndex::fuzzy(char32_t c) const {
  auto it = fuzzy_.find(c);
  return it == fuzzy_.end() ? none_ : it->second;
}

SyntheticCorpus generate_synthetic(const Lexicon& lex, const PinyinTable& ptable,
                                   size_t n_sentences, size_t min_len, size_t max_len,
                                   const NoiseSpec& noise) {
  noise.validate();
  if (lex.size() == 0) throw DataError("synthetic corpus needs a non-empty lexicon");
  if (min_len == 0 || min_len > max_len) {
    throw DataError("synthetic corpus needs 0 < min_len <= max_len");
  }
  HomophoneIndex homophones(ptable, lex.fuzzy());
  std::vector<double> cumulative;
  double total = 0;
  for (const auto& e : lex.entries()) {
    total += static_cast<double>(std::max<uint32_t>(e.frequency, 1));
    cumulative.push_back(total);
  }
  SyntheticCorpus out;
  out.pairs.reserve(n_sentences);

  for (size_t s = 0; s < n_sentences; ++s) {
    // Per-sentence streams keep each sentence independent of the others.
    Rng rng(derive_seed(noise.seed, s));
    size_t want = min_len + uniform_index(rng, max_len - min_len + 1);
    std::u32string target;
    size_t misses = 0;
    while (target.size() < want && misses < 16) {
      double u = uniform01(rng) * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      auto id = static_cast<WordId>(std::min<size_t>(
          static_cast<size_t>(it - cumulative.begin()), lex.size() - 1));
      const auto& w = lex.entry(id);
      if (target.size() + w.surface.size() > max_len) {
        ++misses;
        continue;
      }
      target += w.surface;
    }

    ParallelPair pair{target, target};
    std::vector<size_t> errors;
    for (size_t i = 0; i < target.size(); ++i) {
      if (!bernoulli(rng, noise.error_rate)) continue;
      const auto* pool = &homophones.exact(target[i]);
      const auto* other = &homophones.fuzzy(target[i]);
      if (bernoulli(rng, noise.fuzzy_confusion_prob)) std::swap(pool, other);
      if (pool->empty()) pool = other;
      if (pool->empty()) {
        ++out.unsubstitutable;
        continue;
      }
      pair.source[i] = (*pool)[uniform_index(rng, pool->size())];
      errors.push_back(i);
    }
    out.pairs.push_back(std::move(pair));
    out.error_positions.push_back(std::move(errors));
  }
  return out;
}

SyntheticInventory make_synthetic_inventory(size_t n_chars, size_t n_words,
                                            size_t n_syllables, uint64_t seed) {
  if (n_chars < 2 || n_syllables == 0) {
    throw DataError("inventory needs at least two characters and one syllable");
  }
  Rng rng(derive_seed(seed, 0x1e8));
  auto fuzzy = FuzzyClassTable::defaults();

  // Seed the pool with syllables that have a fuzzy partner so both kinds of
  // confusion occur, then fill with random legal syllables.
  std::vector<std::string> all(all_syllables().begin(), all_syllables().end());
  shuffle(all, rng);
  std::vector<std::string> pool;
  std::set<std::string> in_pool;
  for (const auto& s : all) {
    if (pool.size() >= n_syllables) break;
    if (in_pool.count(s)) continue;
    auto key = fuzzy_key(parse_syllable(s), fuzzy);
    pool.push_back(s);
    in_pool.insert(s);
    if (pool.size() >= n_syllables || pool.size() % 2 == 0) continue;
    for (const auto& o : all) {
      if (o != s && !in_pool.count(o) && fuzzy_key(parse_syllable(o), fuzzy) == key) {
        pool.push_back(o);
        in_pool.insert(o);
        break;
      }
    }
  }

  SyntheticInventory inv;
  std::vector<char32_t> chars;
  for (size_t i = 0; i < n_chars; ++i) {
    auto c = static_cast<char32_t>(0x4E00 + i * 11 + 7);
    chars.push_back(c);
    auto syl = parse_syllable(pool[i % pool.size()]);
    syl.tone = 1 + static_cast<int>(uniform_index(rng, 4));
    inv.ptable.add(c, syl);
    if (bernoulli(rng, 0.05)) {
      inv.ptable.add(c, parse_syllable(pool[uniform_index(rng, pool.size())]));
    }
  }

  std::set<std::u32string> seen;
  size_t attempts = 0;
  while (inv.words.size() < n_words && attempts < n_words * 100) {
    ++attempts;
    char32_t a = chars[uniform_index(rng, chars.size())];
    char32_t b = chars[uniform_index(rng, chars.size())];
    if (a == b) continue;
    std::u32string w{a, b};
    if (!seen.insert(w).second) continue;
    // Zipfian frequencies: the k-th word is k times rarer than the first.
    auto rank = static_cast<double>(inv.words.size() + 1);
    inv.words.push_back({w, static_cast<uint32_t>(std::lround(100000.0 / rank))});
  }
  return inv;
}

}  // namespace desm
