#include "knnc/error.hpp"

namespace knnc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kEmptyDatastore: return "EmptyDatastore";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kOverlap: return "OverlapError";
    case ErrorCode::kNumerical: return "NumericalError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kSplit: return "SplitError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + message), line_(line) {}

SchemaError::SchemaError(std::string field_path, const std::string& message)
    : Error(ErrorCode::kSchema, field_path + ": " + message), field_path_(std::move(field_path)) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace knnc
