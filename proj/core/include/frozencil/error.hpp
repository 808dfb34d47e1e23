#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace frozencil {

enum class ErrorCode {
  kFormat,      // malformed or unsupported file content
  kDimension,   // vector/matrix shape mismatch
  kLabel,       // class index out of range
  kIo,          // file could not be opened, read or written
  kConfig,      // invalid configuration or parameters
  kData,        // input data unusable for the requested operation
  kIndex,       // task or element index out of range
  kArgument,    // invalid function argument (empty batch, length mismatch)
  kConflict,    // duplicate class in a prototype bank
  kState,       // operation invalid in the current object state
  kProtocol,    // evaluation protocol violated (e.g. task i > k)
  kDegenerate,  // degenerate input such as a zero vector
  kNumerical,   // numerical failure (singular matrix, non-finite values)
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Process exit code used by the CLI: 2 configuration, 3 data, 4 numerical.
int exit_code_for(ErrorCode code);

}  // namespace frozencil
