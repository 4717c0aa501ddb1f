#pragma once

#include <stdexcept>
#include <string>

namespace wl3d {

// Every failure mode carries a stable machine-readable code so the CLI can
// map it to an exit status and tests can assert on the exact path taken.
enum class ErrorCode {
  ParseError,
  DuplicatePoints,
  SizeMismatch,
  TooLargeForExhaustive,
  CollinearBase,
  NotRealizable,
  NoConvergence,
  EngineTooLarge,
  DepthExceedsRounds,
  NoNonDegenerateTuple,
  MalformedTranscript,
  CEAbsentFromSignature,
  ImpossibleHistogram,
  InconsistentPairs,
  UnrealizableExternal,
  AmbiguousNode,
  CountMismatch,
  CertificateMismatch,
  BudgetExceeded,
  BadIndices,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace wl3d
