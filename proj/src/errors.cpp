#include "dsr/errors.hpp"

namespace dsr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownSpeaker: return "UnknownSpeaker";
    case ErrorCode::EmptyUtterance: return "EmptyUtterance";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InsufficientSpeakers: return "InsufficientSpeakers";
    case ErrorCode::EmptyTarget: return "EmptyTarget";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingSeverityRates: return "MissingSeverityRates";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::EmptyLattice: return "EmptyLattice";
    case ErrorCode::PairingError: return "PairingError";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::IncompleteRow: return "IncompleteRow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::StageAborted: return "StageAborted";
    case ErrorCode::InternalInvariant: return "InternalInvariant";
  }
  return "UnknownError";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ProtocolError:
    case ErrorCode::BackendTimeout:
    case ErrorCode::BackendError:
    case ErrorCode::StageAborted:
      return 3;
    case ErrorCode::InternalInvariant:
      return 4;
    default:
      return 2;
  }
}

}  // namespace dsr
