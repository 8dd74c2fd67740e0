#pragma once

#include <stdexcept>
#include <string>

namespace hybridir {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kDuplicateId,
  kMissingField,
  kFormat,
  kDimensionMismatch,
  kEmptyInput,
  kData,
};

// All recoverable failures in the core are reported through this type; the
// C API maps `code()` onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hybridir
