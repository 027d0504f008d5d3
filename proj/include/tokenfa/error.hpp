#ifndef TOKENFA_ERROR_HPP
#define TOKENFA_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tokenfa {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed regular expression. `offset()` is the byte offset into the
/// pattern where the problem was detected.
class RegexSyntaxError : public Error {
public:
  RegexSyntaxError(std::size_t offset, std::string reason)
      : Error("regex syntax error at offset " + std::to_string(offset) + ": " +
              reason),
        offset_(offset), reason_(std::move(reason)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string &reason() const noexcept { return reason_; }

private:
  std::size_t offset_;
  std::string reason_;
};

/// A configured state, edge or expansion cap was exceeded.
class ResourceLimitError : public Error {
public:
  using Error::Error;
};

/// Invalid vocabulary contents. `line()` is 1-based, 0 when not tied to a line.
class VocabularyError : public Error {
public:
  VocabularyError(std::size_t line, const std::string &what)
      : Error(line ? "vocabulary line " + std::to_string(line) + ": " + what
                   : "vocabulary: " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ScorerError : public Error {
public:
  using Error::Error;
};

class TransportError : public ScorerError {
public:
  using ScorerError::ScorerError;
};

class ShapeError : public ScorerError {
public:
  using ScorerError::ScorerError;
};

class NormalizationError : public ScorerError {
public:
  using ScorerError::ScorerError;
};

/// Invalid experiment configuration or command-line input.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace tokenfa

#endif
