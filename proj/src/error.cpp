#include "wr/error.hpp"

namespace wr {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateHistogram: return "DegenerateHistogram";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::EmptyDescriptor: return "EmptyDescriptor";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NoValidTriplets: return "NoValidTriplets";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::BadDim: return "BadDim";
    case ErrorCode::EmptyGallery: return "EmptyGallery";
    case ErrorCode::NoRelevant: return "NoRelevant";
    case ErrorCode::NoQueries: return "NoQueries";
    case ErrorCode::ListTooShort: return "ListTooShort";
    case ErrorCode::InsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::EmptyAfterMerge: return "EmptyAfterMerge";
    case ErrorCode::WordTooRare: return "WordTooRare";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace wr
