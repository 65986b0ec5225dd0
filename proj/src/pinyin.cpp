#include "desm/pinyin.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "desm/errors.h"
#include "desm/text.h"

namespace desm {
namespace {

// 'v' stands for u-umlaut (lv, nve).
constexpr std::string_view kSyllables[] = {
    "a", "ai", "an", "ang", "ao",
    "ba", "bai", "ban", "bang", "bao", "bei", "ben", "beng", "bi", "bian",
    "biao", "bie", "bin", "bing", "bo", "bu",
    "ca", "cai", "can", "cang", "cao", "ce", "cen", "ceng", "cha", "chai",
    "chan", "chang", "chao", "che", "chen", "cheng", "chi", "chong", "chou",
    "chu", "chua", "chuai", "chuan", "chuang", "chui", "chun", "chuo", "ci",
    "cong", "cou", "cu", "cuan", "cui", "cun", "cuo",
    "da", "dai", "dan", "dang", "dao", "de", "dei", "den", "deng", "di",
    "dia", "dian", "diao", "die", "ding", "diu", "dong", "dou", "du", "duan",
    "dui", "dun", "duo",
    "e", "ei", "en", "eng", "er",
    "fa", "fan", "fang", "fei", "fen", "feng", "fo", "fou", "fu",
    "ga", "gai", "gan", "gang", "gao", "ge", "gei", "gen", "geng", "gong",
    "gou", "gu", "gua", "guai", "guan", "guang", "gui", "gun", "guo",
    "ha", "hai", "han", "hang", "hao", "he", "hei", "hen", "heng", "hong",
    "hou", "hu", "hua", "huai", "huan", "huang", "hui", "hun", "huo",
    "ji", "jia", "jian", "jiang", "jiao", "jie", "jin", "jing", "jiong", "jiu",
    "ju", "juan", "jue", "jun",
    "ka", "kai", "kan", "kang", "kao", "ke", "kei", "ken", "keng", "kong",
    "kou", "ku", "kua", "kuai", "kuan", "kuang", "kui", "kun", "kuo",
    "la", "lai", "lan", "lang", "lao", "le", "lei", "leng", "li", "lia",
    "lian", "liang", "liao", "lie", "lin", "ling", "liu", "lo", "long", "lou",
    "lu", "luan", "lun", "luo", "lv", "lve",
    "ma", "mai", "man", "mang", "mao", "me", "mei", "men", "meng", "mi",
    "mian", "miao", "mie", "min", "ming", "miu", "mo", "mou", "mu",
    "na", "nai", "nan", "nang", "nao", "ne", "nei", "nen", "neng", "ni",
    "nian", "niang", "niao", "nie", "nin", "ning", "niu", "nong", "nou", "nu",
    "nuan", "nuo", "nv", "nve",
    "o", "ou",
    "pa", "pai", "pan", "pang", "pao", "pei", "pen", "peng", "pi", "pian",
    "piao", "pie", "pin", "ping", "po", "pou", "pu",
    "qi", "qia", "qian", "qiang", "qiao", "qie", "qin", "qing", "qiong", "qiu",
    "qu", "quan", "que", "qun",
    "ran", "rang", "rao", "re", "ren", "reng", "ri", "rong", "rou", "ru",
    "rua", "ruan", "rui", "run", "ruo",
    "sa", "sai", "san", "sang", "sao", "se", "sen", "seng", "sha", "shai",
    "shan", "shang", "shao", "she", "shei", "shen", "sheng", "shi", "shou",
    "shu", "shua", "shuai", "shuan", "shuang", "shui", "shun", "shuo", "si",
    "song", "sou", "su", "suan", "sui", "sun", "suo",
    "ta", "tai", "tan", "tang", "tao", "te", "tei", "teng", "ti", "tian",
    "tiao", "tie", "ting", "tong", "tou", "tu", "tuan", "tui", "tun", "tuo",
    "wa", "wai", "wan", "wang", "wei", "wen", "weng", "wo", "wu",
    "xi", "xia", "xian", "xiang", "xiao", "xie", "xin", "xing", "xiong", "xiu",
    "xu", "xuan", "xue", "xun",
    "ya", "yan", "yang", "yao", "ye", "yi", "yin", "ying", "yo", "yong",
    "you", "yu", "yuan", "yue", "yun",
    "za", "zai", "zan", "zang", "zao", "ze", "zei", "zen", "zeng", "zha",
    "zhai", "zhan", "zhang", "zhao", "zhe", "zhei", "zhen", "zheng", "zhi",
    "zhong", "zhou", "zhu", "zhua", "zhuai", "zhuan", "zhuang", "zhui", "zhun",
    "zhuo", "zi", "zong", "zou", "zu", "zuan", "zui", "zun", "zuo",
};

constexpr std::string_view kInitials[] = {
    "b", "c",  "ch", "d", "f", "g", "h", "j", "k",  "l", "m", "n",
    "p", "q",  "r",  "s", "sh", "t", "w", "x", "y", "z", "zh",
};

size_t initial_length(std::string_view s) {
  if (s.size() >= 2 && s[1] == 'h' && (s[0] == 'z' || s[0] == 'c' || s[0] == 's')) {
    return 2;
  }
  if (!s.empty() && is_initial(s.substr(0, 1))) return 1;
  return 0;
}

const std::vector<std::string_view>& finals_list() {
  static const std::vector<std::string_view> finals = [] {
    std::set<std::string_view> seen;
    for (auto s : kSyllables) seen.insert(s.substr(initial_length(s)));
    return std::vector<std::string_view>(seen.begin(), seen.end());
  }();
  return finals;
}

const std::string& rep_or_self(const std::map<std::string, std::string>& reps,
                               const std::string& sym) {
  auto it = reps.find(sym);
  return it == reps.end() ? sym : it->second;
}

std::vector<std::vector<std::string>> collect_classes(
    const std::map<std::string, std::string>& reps) {
  std::map<std::string, std::vector<std::string>> by_rep;
  for (const auto& [sym, rep] : reps) by_rep[rep].push_back(sym);
  std::vector<std::vector<std::string>> out;
  for (auto& [rep, members] : by_rep) out.push_back(std::move(members));
  return out;
}

}  // namespace

bool is_valid_syllable(std::string_view toneless) {
  return std::binary_search(std::begin(kSyllables), std::end(kSyllables), toneless);
}

bool is_initial(std::string_view s) {
  return std::binary_search(std::begin(kInitials), std::end(kInitials), s);
}

bool is_final(std::string_view s) {
  const auto& f = finals_list();
  return std::binary_search(f.begin(), f.end(), s);
}

std::span<const std::string_view> all_syllables() { return kSyllables; }
std::span<const std::string_view> all_initials() { return kInitials; }
std::span<const std::string_view> all_finals() { return finals_list(); }

std::string PinyinSyllable::render() const {
  std::string out = toneless();
  if (tone != 0) out += static_cast<char>('0' + tone);
  return out;
}

PinyinSyllable parse_syllable(std::string_view s) {
  std::string original(s);
  PinyinSyllable out;
  if (!s.empty() && s.back() >= '0' && s.back() <= '5') {
    // 5 is a common spelling of the neutral tone.
    out.tone = s.back() == '5' ? 0 : s.back() - '0';
    s.remove_suffix(1);
  }
  if (s.empty() || !is_valid_syllable(s)) throw InvalidSyllable(original);
  size_t n = initial_length(s);
  out.initial = std::string(s.substr(0, n));
  out.final = std::string(s.substr(n));
  return out;
}

FuzzyClassTable FuzzyClassTable::defaults() {
  FuzzyClassTable t;
  t.add_class({"z", "zh"});
  t.add_class({"c", "ch"});
  t.add_class({"s", "sh"});
  t.add_class({"l", "n"});
  t.add_class({"f", "h"});
  t.add_class({"an", "ang"});
  t.add_class({"en", "eng"});
  t.add_class({"in", "ing"});
  return t;
}

void FuzzyClassTable::add_class(const std::vector<std::string>& members) {
  if (members.size() < 2) return;
  bool initials = is_initial(members.front());
  for (const auto& m : members) {
    if (initials ? !is_initial(m) : !is_final(m)) {
      throw DataError("fuzzy class member '" + m +
                      "' is not a pinyin " + (initials ? "initial" : "final") +
                      " like the rest of its class");
    }
  }
  auto& reps = initials ? initial_rep_ : final_rep_;
  std::set<std::string> uniq(members.begin(), members.end());
  for (const auto& m : uniq) {
    if (reps.count(m)) {
      throw DataError("fuzzy symbol '" + m + "' appears in more than one class");
    }
  }
  const std::string& rep = *uniq.begin();
  for (const auto& m : uniq) reps[m] = rep;
}

FuzzyClassTable FuzzyClassTable::parse(std::istream& in,
                                       const std::string& source) {
  FuzzyClassTable t;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<std::string> members;
    for (auto f : split(body, ' ')) {
      if (!f.empty()) members.emplace_back(f);
    }
    if (members.size() < 2) {
      throw MalformedLine(source, line_no, "a class needs at least two members");
    }
    try {
      t.add_class(members);
    } catch (const MalformedLine&) {
      throw;
    } catch (const DataError& e) {
      throw MalformedLine(source, line_no, e.what());
    }
  }
  return t;
}

FuzzyClassTable FuzzyClassTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fuzzy class file " + path.string());
  return parse(in, path.string());
}

const std::string& FuzzyClassTable::initial_rep(const std::string& initial) const {
  return rep_or_self(initial_rep_, initial);
}

const std::string& FuzzyClassTable::final_rep(const std::string& final) const {
  return rep_or_self(final_rep_, final);
}

std::vector<std::vector<std::string>> FuzzyClassTable::initial_classes() const {
  return collect_classes(initial_rep_);
}

std::vector<std::vector<std::string>> FuzzyClassTable::final_classes() const {
  return collect_classes(final_rep_);
}

SyllableKey fuzzy_key(const PinyinSyllable& s, const FuzzyClassTable& t) {
  return {t.initial_rep(s.initial), t.final_rep(s.final)};
}

SyllableKey canonicalize(const SyllableKey& k, const FuzzyClassTable& t) {
  return {t.initial_rep(k.initial), t.final_rep(k.final)};
}

bool syllables_equivalent(const PinyinSyllable& a, const PinyinSyllable& b,
                          const FuzzyClassTable& t) {
  return fuzzy_key(a, t) == fuzzy_key(b, t);
}

void PinyinTable::add(char32_t ch, PinyinSyllable reading) {
  auto& rs = table_[ch];
  for (const auto& r : rs) {
    if (r.same_sound(reading)) return;
  }
  rs.push_back(std::move(reading));
}

std::span<const PinyinSyllable> PinyinTable::readings(char32_t ch) const {
  auto it = table_.find(ch);
  if (it == table_.end()) return {};
  return it->second;
}

PinyinTable PinyinTable::parse(std::istream& in, const std::string& source) {
  PinyinTable t;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = strip_cr(line);
    if (trim(body).empty() || body.front() == '#') continue;
    auto fields = split(body, '\t');
    if (fields.size() != 2) {
      throw MalformedLine(source, line_no, "expected `char<TAB>reading`");
    }
    std::u32string ch;
    try {
      ch = decode_utf8(fields[0]);
    } catch (const Utf8Error& e) {
      throw MalformedLine(source, line_no, e.what());
    }
    if (ch.size() != 1) {
      throw MalformedLine(source, line_no, "first field must be one character");
    }
    try {
      t.add(ch[0], parse_syllable(trim(fields[1])));
    } catch (const InvalidSyllable& e) {
      throw MalformedLine(source, line_no, e.what());
    }
  }
  return t;
}

PinyinTable PinyinTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pinyin table " + path.string());
  return parse(in, path.string());
}

void PinyinTable::write(std::ostream& out) const {
  for (const auto& [ch, rs] : table_) {
    for (const auto& r : rs) out << encode_utf8(ch) << '\t' << r.render() << '\n';
  }
}

}  // namespace desm
