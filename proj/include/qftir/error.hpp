#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qftir {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  GridMismatch,
  NonOverlappingGrids,
  ExtrapolationRequired,
  UnknownSpecies,
  NegativeConcentration,
  GridTooCoarse,
  NyquistViolation,
  WrongAxis,
  InvalidBand,
  InvalidInterferogram,
  InsufficientFringes,
  NonMonotonicPhase,
  TooManyFailedScans,
  ReferenceNonPositive,
  InsufficientPoints,
  IllConditionedFit,
  BandNotCovered,
  SingularDesign,
  NonMonotonicTimestamps,
  NoConvergence,
  DegenerateInitialGuess,
  MalformedHeader,
  MalformedBody,
  PointCountMismatch,
  NegativeValue,
  MultiRecordUnsupported,
  NonUniformGrid,
  ParseError,
  SchemaVersionMismatch,
  MissingField,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as this type. `line()` is set by the
/// text parsers and points at the 1-based input line that was rejected.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace qftir
