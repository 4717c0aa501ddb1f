#include "wl3d/error.hpp"

namespace wl3d {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePoints: return "DuplicatePoints";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::TooLargeForExhaustive: return "TooLargeForExhaustive";
    case ErrorCode::CollinearBase: return "CollinearBase";
    case ErrorCode::NotRealizable: return "NotRealizable";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EngineTooLarge: return "EngineTooLarge";
    case ErrorCode::DepthExceedsRounds: return "DepthExceedsRounds";
    case ErrorCode::NoNonDegenerateTuple: return "NoNonDegenerateTuple";
    case ErrorCode::MalformedTranscript: return "MalformedTranscript";
    case ErrorCode::CEAbsentFromSignature: return "CEAbsentFromSignature";
    case ErrorCode::ImpossibleHistogram: return "ImpossibleHistogram";
    case ErrorCode::InconsistentPairs: return "InconsistentPairs";
    case ErrorCode::UnrealizableExternal: return "UnrealizableExternal";
    case ErrorCode::AmbiguousNode: return "AmbiguousNode";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::CertificateMismatch: return "CertificateMismatch";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::BadIndices: return "BadIndices";
  }
  return "UnknownError";
}

}  // namespace wl3d
