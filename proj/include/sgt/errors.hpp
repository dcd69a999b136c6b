#pragma once

#include <stdexcept>
#include <string>

namespace sgt {

enum class ErrorKind {
  usage,
  validation,
  invalid_encoding,
  unsupported_pattern,
  insufficient_window,
  precision,
  resource,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by from_degrees with the first prefix that breaks the ladder condition.
class InvalidEncoding : public Error {
 public:
  InvalidEncoding(std::size_t index, const std::string& what)
      : Error(ErrorKind::invalid_encoding, what), index_(index) {}

  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

const char* kind_name(ErrorKind kind);

// Process exit code used by the command-line tool.
int exit_code(ErrorKind kind);

}  // namespace sgt
