#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conex {

/// Broad failure classes. The CLI maps each to its own exit code.
enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kMissingInput,
  kSchema,
  kSeedConflict,
  kNotFound,
  kDivergence,
  kDegenerate,
  kMissingJudgment,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kMissingInput: return "missing_input";
    case ErrorKind::kSchema: return "schema_violation";
    case ErrorKind::kSeedConflict: return "seed_conflict";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kMissingJudgment: return "missing_judgment";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by line-oriented readers; carries the 1-based offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::kParse,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace conex
