#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

enum class ErrorCode {
  // validation (exit 2)
  DuplicateId,
  UnknownSpeaker,
  EmptyUtterance,
  InvalidManifest,
  InsufficientSpeakers,
  EmptyTarget,
  EmptyPool,
  EmptyCorpus,
  MissingSeverityRates,
  EmptyVocabulary,
  EmptyLattice,
  PairingError,
  EmptyGroup,
  IncompleteRow,
  InvalidConfig,
  // backend (exit 3)
  ProtocolError,
  BackendTimeout,
  BackendError,
  StageAborted,
  // internal (exit 4)
  InternalInvariant,
};

const char* to_string(ErrorCode code);

/// Exit code convention: 2 validation error, 3 backend error, 4 internal invariant breach.
int exit_code_for(ErrorCode code);

class DsrError : public std::runtime_error {
 public:
  DsrError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dsr
