#pragma once

#include <stdexcept>
#include <string>

namespace emmkgr {

enum class ErrorKind {
  kFormat,
  kTruncation,
  kDuplicateId,
  kCatalogMismatch,
  kEmptyData,
  kInvalidArgument,
  kContractViolation,
  kIo,
  kNumeric,
  kFingerprintMismatch,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error: 2 usage/input, 3 numeric, 4 artifact mismatch.
int exit_code_for(ErrorKind kind);

}  // namespace emmkgr
