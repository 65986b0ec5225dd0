#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace desm {

/// Raised for byte sequences that are not valid UTF-8.
class Utf8Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes strict UTF-8 into code points. Overlong forms, surrogates and
/// truncated sequences are rejected.
std::u32string decode_utf8(std::string_view bytes);

std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t c);

/// Splits on a single-byte delimiter; empty fields are preserved.
std::vector<std::string_view> split(std::string_view line, char delim);

std::string_view trim(std::string_view s);

/// Removes a trailing '\r' left by CRLF files.
std::string_view strip_cr(std::string_view s);

}  // namespace desm
