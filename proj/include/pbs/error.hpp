#pragma once

#include <stdexcept>
#include <string>

namespace pbs {

// Values are shared with the C API status codes in pbs.h.
enum class ErrorCode : int {
  InvalidArgument = 1,
  Singular = 2,
  DegreesOfFreedom = 3,
  Degenerate = 4,
  SelectionFailure = 5,
  Ingestion = 6,
  Config = 7,
  Io = 8,
  Internal = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Process exit code for an error class: 2 config, 3 ingestion, 4 numerical,
/// 1 anything else.
int exit_code_for(ErrorCode code) noexcept;

const char* to_string(ErrorCode code) noexcept;

}  // namespace pbs
