#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "desm/lattice.h"

namespace desm {

/// Character vocabulary. Ids 0 and 1 are UNK and PAD; real characters
/// follow in ascending code-point order so the mapping is reproducible.
class CharVocab {
 public:
  CharVocab() = default;

  static CharVocab from_chars(std::vector<char32_t> chars);

  int32_t id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnkId : it->second;
  }
  /// Throws std::out_of_range for UNK/PAD and ids past the end.
  char32_t character(int32_t id) const;
  bool is_real(int32_t id) const {
    return id >= kFirstRealId && static_cast<size_t>(id) < size();
  }

  std::vector<int32_t> encode(std::u32string_view text) const;

  size_t size() const { return chars_.size() + kFirstRealId; }
  const std::vector<char32_t>& chars() const { return chars_; }

  friend bool operator==(const CharVocab& a, const CharVocab& b) {
    return a.chars_ == b.chars_;
  }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int32_t> index_;
};

}  // namespace desm
