#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace autocode {

// Base of every exception thrown by the library. The CLI maps the concrete
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MissingInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EnumerationCap : public Error {
 public:
  using Error::Error;
};

class UnknownQuery : public Error {
 public:
  explicit UnknownQuery(const std::string& id)
      : Error("unknown query id '" + id + "'") {}
};

}  // namespace autocode
