#include "desm/vocab.h"

#include <algorithm>
#include <stdexcept>

namespace desm {

CharVocab CharVocab::from_chars(std::vector<char32_t> chars) {
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  CharVocab v;
  v.chars_ = std::move(chars);
  for (size_t i = 0; i < v.chars_.size(); ++i) {
    v.index_.emplace(v.chars_[i], static_cast<int32_t>(i) + kFirstRealId);
  }
  return v;
}

char32_t CharVocab::character(int32_t id) const {
  if (!is_real(id)) throw std::out_of_range("character id has no glyph");
  return chars_[static_cast<size_t>(id - kFirstRealId)];
}

std::vector<int32_t> CharVocab::encode(std::u32string_view text) const {
  std::vector<int32_t> ids;
  ids.reserve(text.size());
  for (char32_t c : text) ids.push_back(id(c));
  return ids;
}

}  // namespace desm
