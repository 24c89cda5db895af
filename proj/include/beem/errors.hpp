#pragma once

#include <stdexcept>
#include <string>

namespace beem {

// Base of every error raised by the library. The CLI maps these to exit
// status 2 (data error); usage errors never reach this hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A type invariant was violated. `invariant()` names it (e.g. "normalization").
class ValidationError : public Error {
 public:
  ValidationError(std::string invariant, const std::string& detail)
      : Error("validation error [" + invariant + "]: " + detail),
        invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

// Malformed input text. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail)
      : Error("parse error at line " + std::to_string(line) + ": " + detail),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& detail)
      : Error("shape error: " + detail) {}
};

class LabelRequiredError : public Error {
 public:
  explicit LabelRequiredError(const std::string& what)
      : Error("label required: " + what) {}
};

class EmptyDataError : public Error {
 public:
  explicit EmptyDataError(const std::string& what)
      : Error("empty data: " + what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& detail)
      : Error("domain error: " + detail) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& detail)
      : Error("range error: " + detail) {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& detail)
      : Error("I/O error on '" + path + "': " + detail) {}
};

// Strict configuration parsing failure (unknown key, wrong type).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail)
      : Error("config error: " + detail) {}
};

}  // namespace beem
