#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace knnc {

enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kMissingLabel,
  kEmptyDatastore,
  kInvalidConfig,
  kOverlap,
  kNumerical,
  kParse,
  kSchema,
  kSplit,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code is
/// stable and meant for programmatic handling; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input text. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant. `field_path()` names the
/// offending field, e.g. `instances[train-0003].variants[2].embedding`.
class SchemaError : public Error {
 public:
  SchemaError(std::string field_path, const std::string& message);
  const std::string& field_path() const noexcept { return field_path_; }

 private:
  std::string field_path_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace knnc
