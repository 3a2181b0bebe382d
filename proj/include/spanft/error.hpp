#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spanft {

// Base of every error thrown by the library. The CLI maps any Error to exit
// code 2 (data/validation error); std::invalid_argument-style misuse of the
// API is reported as ArgumentError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Input bytes are not valid UTF-8.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t byte_offset, const std::string& what)
      : Error("invalid UTF-8 at byte offset " + std::to_string(byte_offset) +
              ": " + what),
        byte_offset_(byte_offset),
        reason_(what) {}

  std::size_t byte_offset() const { return byte_offset_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t byte_offset_;
  std::string reason_;
};

// Malformed text input. line() is 1-based; 0 when unknown. The message
// reads "<source>:<line>: <detail>" or "line <line>: <detail>".
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail)
      : ParseError(std::string(), line, detail) {}
  ParseError(const std::string& source, std::size_t line, const std::string& detail)
      : Error(format(source, line, detail)), line_(line), detail_(detail) {}

  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string format(const std::string& source, std::size_t line,
                            const std::string& detail) {
    if (!source.empty()) {
      return source + (line ? ":" + std::to_string(line) : std::string()) + ": " + detail;
    }
    return line ? "line " + std::to_string(line) + ": " + detail : detail;
  }

  std::size_t line_;
  std::string detail_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// A record violated a structural invariant. record() is 1-based.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t record, const std::string& what)
      : Error(record ? "record " + std::to_string(record) + ": " + what : what),
        record_(record) {}

  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

class EmptySentenceError : public Error {
 public:
  EmptySentenceError() : Error("empty sentence") {}
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class EmptySpansError : public Error {
 public:
  EmptySpansError() : Error("no valid spans") {}
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CacheError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Binary container problems: bad magic, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Binary container ended before the declared payload.
class LengthError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace spanft
