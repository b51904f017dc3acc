#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hvaudit {

enum class ErrorCode {
  kUnknownLabel,
  kMalformedRecord,
  kIo,
  kOutOfRange,
  kEmptyInput,
  kInsufficientData,
  kDegenerateData,
  kMissingEmbedding,
  kDimensionMismatch,
  kMissingClass,
  kConfigInvalid,
  kLengthMismatch,
  kIncompleteSheet,
  kFingerprintMismatch,
  kEmptyAfterFilter,
  kTaxonomyMismatch,
  kUnknownAnnotator,
  kNotAssigned,
  kNotInDisagreement,
  kEmptyCorpus,
  kMissingInput,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; `code()` drives CLI exit
// codes and HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hvaudit
