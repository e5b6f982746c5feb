#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bdt {

/// Malformed or unusable user input (files, flags, queries).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The score memo grew past its configured entry cap.
class MemoCapExceeded : public std::runtime_error {
 public:
  explicit MemoCapExceeded(std::size_t cap)
      : std::runtime_error("memo table exceeded entry cap of " + std::to_string(cap)),
        cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

/// Tree text that does not follow the s-expression grammar.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : InputError(what + " at line " + std::to_string(line) + ", column " +
                   std::to_string(column)),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Brute-force enumeration would exceed its tree cap.
class EnumerationCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bdt
