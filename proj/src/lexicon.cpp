#include "desm/lexicon.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "desm/errors.h"
#include "desm/text.h"

namespace desm {
namespace {

constexpr const char* kLexiconMagic = "desm-lexicon";

using nlohmann::json;

json key_to_json(const Lexicon::BigramKey& k) {
  return json::array({k.first.initial, k.first.final, k.second.initial,
                      k.second.final});
}

}  // namespace

std::vector<RawWord> Lexicon::parse_word_file(std::istream& in,
                                              const std::string& source) {
  std::vector<RawWord> words;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = strip_cr(line);
    if (trim(body).empty() || body.front() == '#') continue;
    auto fields = split(body, '\t');
    if (fields.size() > 2) {
      throw MalformedLine(source, line_no, "expected `surface[<TAB>frequency]`");
    }
    RawWord w;
    try {
      w.surface = decode_utf8(trim(fields[0]));
    } catch (const Utf8Error& e) {
      throw MalformedLine(source, line_no, e.what());
    }
    if (w.surface.empty()) throw MalformedLine(source, line_no, "empty surface");
    if (fields.size() == 2) {
      auto f = trim(fields[1]);
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), w.frequency);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw MalformedLine(source, line_no, "frequency is not a nonnegative integer");
      }
    }
    if (w.surface.size() > kMaxWordLength) {
      throw WordTooLong(encode_utf8(w.surface));
    }
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<RawWord> Lexicon::read_word_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word file " + path.string());
  return parse_word_file(in, path.string());
}

Lexicon Lexicon::build(const std::vector<RawWord>& words,
                       const PinyinTable& ptable, const FuzzyClassTable& fuzzy) {
  Lexicon lex;
  lex.fuzzy_ = fuzzy;
  std::set<std::u32string> seen;
  for (const auto& w : words) {
    if (w.surface.empty()) throw DataError("empty word surface");
    if (w.surface.size() > kMaxWordLength) throw WordTooLong(encode_utf8(w.surface));
    if (!seen.insert(w.surface).second) {
      throw DataError("duplicate word '" + encode_utf8(w.surface) + "'");
    }
    WordEntry e;
    e.word_id = static_cast<WordId>(lex.entries_.size());
    e.surface = w.surface;
    e.frequency = w.frequency;
    for (char32_t c : w.surface) {
      auto rs = ptable.readings(c);
      if (rs.empty()) throw MissingPinyin(encode_utf8(c));
      e.pinyin.emplace_back(rs.begin(), rs.end());
    }
    lex.entries_.push_back(std::move(e));
  }
  lex.index_entries();
  return lex;
}

Lexicon Lexicon::build_from_file(const std::filesystem::path& word_file,
                                 const PinyinTable& ptable,
                                 const FuzzyClassTable& fuzzy) {
  return build(read_word_file(word_file), ptable, fuzzy);
}

void Lexicon::index_entries() {
  trie_.assign(1, TrieNode{});
  pinyin_index_.clear();
  for (const auto& e : entries_) {
    uint32_t node = 0;
    for (char32_t c : e.surface) {
      auto it = trie_[node].children.find(c);
      if (it == trie_[node].children.end()) {
        auto next = static_cast<uint32_t>(trie_.size());
        trie_[node].children.emplace(c, next);
        trie_.emplace_back();
        node = next;
      } else {
        node = it->second;
      }
    }
    trie_[node].word = e.word_id;

    if (e.surface.size() != 2) continue;
    std::set<BigramKey> keys;
    for (const auto& a : e.pinyin[0]) {
      for (const auto& b : e.pinyin[1]) {
        keys.emplace(fuzzy_key(a, fuzzy_), fuzzy_key(b, fuzzy_));
      }
    }
    for (const auto& k : keys) pinyin_index_[k].push_back(e.word_id);
  }
  for (auto& [key, ids] : pinyin_index_) {
    std::stable_sort(ids.begin(), ids.end(), [&](WordId x, WordId y) {
      if (entries_[x].frequency != entries_[y].frequency) {
        return entries_[x].frequency > entries_[y].frequency;
      }
      return x < y;
    });
  }
}

std::optional<WordId> Lexicon::find(std::u32string_view surface) const {
  uint32_t node = 0;
  for (char32_t c : surface) {
    auto it = trie_[node].children.find(c);
    if (it == trie_[node].children.end()) return std::nullopt;
    node = it->second;
  }
  if (surface.empty() || trie_[node].word < 0) return std::nullopt;
  return static_cast<WordId>(trie_[node].word);
}

std::vector<WordSpan> Lexicon::trie_match_all(std::u32string_view sentence) const {
  std::vector<WordSpan> out;
  for (size_t start = 0; start < sentence.size(); ++start) {
    uint32_t node = 0;
    for (size_t end = start; end < sentence.size(); ++end) {
      auto it = trie_[node].children.find(sentence[end]);
      if (it == trie_[node].children.end()) break;
      node = it->second;
      if (trie_[node].word >= 0) {
        out.push_back({start, end, static_cast<WordId>(trie_[node].word)});
      }
    }
  }
  return out;
}

std::vector<WordId> Lexicon::lookup_key(const BigramKey& key) const {
  auto it = pinyin_index_.find(key);
  if (it == pinyin_index_.end()) return {};
  return it->second;
}

std::vector<WordId> Lexicon::pinyin_2gram_lookup(const PinyinSyllable& a,
                                                 const PinyinSyllable& b) const {
  return lookup_key({fuzzy_key(a, fuzzy_), fuzzy_key(b, fuzzy_)});
}

std::string Lexicon::serialize() const {
  json j;
  j["magic"] = kLexiconMagic;
  j["version"] = kLexiconFormatVersion;
  j["fuzzy"] = {{"initials", fuzzy_.initial_classes()},
                {"finals", fuzzy_.final_classes()}};
  json entries = json::array();
  for (const auto& e : entries_) {
    json py = json::array();
    for (const auto& rs : e.pinyin) {
      json r = json::array();
      for (const auto& s : rs) r.push_back(s.render());
      py.push_back(std::move(r));
    }
    entries.push_back({{"surface", encode_utf8(e.surface)},
                       {"frequency", e.frequency},
                       {"pinyin", std::move(py)}});
  }
  j["entries"] = std::move(entries);
  json trie = json::array();
  for (const auto& n : trie_) {
    json next = json::array();
    for (const auto& [c, child] : n.children) {
      next.push_back({static_cast<uint32_t>(c), child});
    }
    trie.push_back({{"word", n.word}, {"next", std::move(next)}});
  }
  j["trie"] = std::move(trie);
  json index = json::array();
  for (const auto& [k, ids] : pinyin_index_) {
    index.push_back({{"key", key_to_json(k)}, {"ids", ids}});
  }
  j["pinyin_index"] = std::move(index);
  return j.dump() + "\n";
}

Lexicon Lexicon::deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("lexicon is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("magic", "") != kLexiconMagic) {
    throw FormatError("not a serialized lexicon (bad magic)");
  }
  if (j.value("version", -1) != kLexiconFormatVersion) {
    throw FormatError("unsupported lexicon version " +
                      j.value("version", json()).dump());
  }
  Lexicon lex;
  try {
    FuzzyClassTable fuzzy;
    for (const auto& cls : j.at("fuzzy").at("initials")) {
      fuzzy.add_class(cls.get<std::vector<std::string>>());
    }
    for (const auto& cls : j.at("fuzzy").at("finals")) {
      fuzzy.add_class(cls.get<std::vector<std::string>>());
    }
    lex.fuzzy_ = fuzzy;
    for (const auto& je : j.at("entries")) {
      WordEntry e;
      e.word_id = static_cast<WordId>(lex.entries_.size());
      e.surface = decode_utf8(je.at("surface").get<std::string>());
      e.frequency = je.at("frequency").get<uint32_t>();
      for (const auto& rs : je.at("pinyin")) {
        std::vector<PinyinSyllable> readings;
        for (const auto& s : rs) readings.push_back(parse_syllable(s.get<std::string>()));
        e.pinyin.push_back(std::move(readings));
      }
      if (e.surface.empty() || e.surface.size() > kMaxWordLength ||
          e.pinyin.size() != e.surface.size()) {
        throw FormatError("lexicon entry " + std::to_string(e.word_id) +
                          " is inconsistent");
      }
      lex.entries_.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed lexicon: ") + e.what());
  } catch (const Utf8Error& e) {
    throw FormatError(std::string("malformed lexicon: ") + e.what());
  }
  lex.index_entries();
  // The stored indexes must be exactly what the entries produce.
  json rebuilt = json::parse(lex.serialize());
  if (rebuilt.at("trie") != j.at("trie") ||
      rebuilt.at("pinyin_index") != j.at("pinyin_index")) {
    throw FormatError("lexicon indexes do not match its entries");
  }
  return lex;
}

void Lexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write lexicon " + path.string());
  out << serialize();
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace desm
