#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace apuf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range construction arguments (n = 0, sigma <= 0, bad fraction, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Challenge or feature width does not match the instance/model it is fed to.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Carries the 1-based line (file input) and the 0-based
// character offset (word input) when known.
class ParseError : public Error {
 public:
  explicit ParseError(std::string message,
                      std::optional<std::size_t> line = std::nullopt,
                      std::optional<std::size_t> offset = std::nullopt)
      : Error(decorate(message, line, offset)),
        message_(std::move(message)),
        line_(line),
        offset_(offset) {}

  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  static std::string decorate(const std::string& message,
                              std::optional<std::size_t> line,
                              std::optional<std::size_t> offset) {
    std::string out;
    if (line) out += "line " + std::to_string(*line) + ": ";
    out += message;
    if (offset) out += " (at offset " + std::to_string(*offset) + ")";
    return out;
  }

  std::string message_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> offset_;
};

// A hex word carries more significant bits than the declared width.
class WidthError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace apuf
