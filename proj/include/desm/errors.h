#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace desm {

/// Base for every failure caused by bad input data (files, text, checkpoints).
/// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSyllable : public DataError {
 public:
  explicit InvalidSyllable(const std::string& s)
      : DataError("invalid pinyin syllable: '" + s + "'"), syllable(s) {}
  std::string syllable;
};

class MalformedLine : public DataError {
 public:
  MalformedLine(const std::string& source, size_t line, const std::string& why)
      : DataError(source + ":" + std::to_string(line) + ": malformed line: " +
                  why),
        line_no(line) {}
  size_t line_no;
};

class MissingPinyin : public DataError {
 public:
  explicit MissingPinyin(const std::string& ch)
      : DataError("no pinyin reading for character '" + ch + "'"),
        character(ch) {}
  std::string character;
};

class WordTooLong : public DataError {
 public:
  explicit WordTooLong(const std::string& surface)
      : DataError("word longer than 4 characters: '" + surface + "'"),
        surface(surface) {}
  std::string surface;
};

class LengthMismatch : public DataError {
 public:
  LengthMismatch(const std::string& where, size_t line)
      : DataError(where + ": length mismatch at line " + std::to_string(line)),
        line_no(line) {}
  size_t line_no;
};

class SequenceTooLong : public DataError {
 public:
  SequenceTooLong(size_t n, size_t max_len)
      : DataError("sequence of length " + std::to_string(n) +
                  " exceeds max_len " + std::to_string(max_len)) {}
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace desm
