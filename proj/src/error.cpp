#include "qftir/error.hpp"

namespace qftir {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonOverlappingGrids: return "NonOverlappingGrids";
    case ErrorCode::ExtrapolationRequired: return "ExtrapolationRequired";
    case ErrorCode::UnknownSpecies: return "UnknownSpecies";
    case ErrorCode::NegativeConcentration: return "NegativeConcentration";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NyquistViolation: return "NyquistViolation";
    case ErrorCode::WrongAxis: return "WrongAxis";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::InvalidInterferogram: return "InvalidInterferogram";
    case ErrorCode::InsufficientFringes: return "InsufficientFringes";
    case ErrorCode::NonMonotonicPhase: return "NonMonotonicPhase";
    case ErrorCode::TooManyFailedScans: return "TooManyFailedScans";
    case ErrorCode::ReferenceNonPositive: return "ReferenceNonPositive";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::BandNotCovered: return "BandNotCovered";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateInitialGuess: return "DegenerateInitialGuess";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MalformedBody: return "MalformedBody";
    case ErrorCode::PointCountMismatch: return "PointCountMismatch";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::MultiRecordUnsupported: return "MultiRecordUnsupported";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message, std::optional<std::size_t> line) {
  std::string out{to_string(code)};
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line) {}

}  // namespace qftir
