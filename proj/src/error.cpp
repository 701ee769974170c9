#include "pbs/error.hpp"

namespace pbs {

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Config:
      return 2;
    case ErrorCode::Ingestion:
    case ErrorCode::Io:
      return 3;
    case ErrorCode::Singular:
    case ErrorCode::DegreesOfFreedom:
    case ErrorCode::Degenerate:
    case ErrorCode::SelectionFailure:
      return 4;
    case ErrorCode::Internal:
      break;
  }
  return 1;
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Singular: return "singular system";
    case ErrorCode::DegreesOfFreedom: return "insufficient degrees of freedom";
    case ErrorCode::Degenerate: return "degenerate quantity";
    case ErrorCode::SelectionFailure: return "selection failure";
    case ErrorCode::Ingestion: return "ingestion error";
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace pbs
