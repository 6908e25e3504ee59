#pragma once

#include <stdexcept>
#include <string>

namespace hatebench {

enum class ErrorCode {
  MissingFile,
  MalformedRow,
  UnknownLabel,
  DuplicateId,
  UnlabeledDocument,
  BadK,
  EmptyCorpus,
  BadConfig,
  DimensionMismatch,
  ZeroCount,
  NonFinite,
  IdOutOfRange,
  ShapeMismatch,
  EmptyTime,
  EmptySequence,
  NonFiniteGradient,
  NonFiniteLoss,
  EmptySplit,
  BadHeader,
  DimMismatch,
  MalformedLine,
  LengthMismatch,
  EmptyMatrix,
  AllZeroWeights,
  VersionOrCorruption,
  Io,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnlabeledDocument: return "UnlabeledDocument";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroCount: return "ZeroCount";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTime: return "EmptyTime";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::VersionOrCorruption: return "VersionOrCorruption";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `what()` reads "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hatebench
