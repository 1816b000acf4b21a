#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wr {

enum class ErrorCode {
  DegenerateHistogram,
  InvalidConfig,
  InvalidArgument,
  IoError,
  FormatError,
  UnknownEntity,
  EmptyDescriptor,
  TooFewPoints,
  DimMismatch,
  EmptySet,
  NoValidTriplets,
  ZeroVector,
  TooFewSamples,
  BadDim,
  EmptyGallery,
  NoRelevant,
  NoQueries,
  ListTooShort,
  InsufficientCorpus,
  EmptyAfterMerge,
  WordTooRare,
};

std::string_view error_name(ErrorCode code);

/// Every failure raised by the library. `code()` identifies the contract
/// violation; `what()` carries a human readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace wr
