#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace envforge {

// Closed set of error codes. Validation reports use the first block; the rest
// surface as exceptions from the runtime modules.
enum class ErrorCode {
  FileNotFound,
  ParseError,
  IncludeCycle,
  UnknownFunctor,
  MissingField,
  TypeMismatch,
  UnknownUnit,
  DimensionMismatch,
  UnknownReference,
  UnknownPartGroup,
  UnknownHyperparameter,
  UnknownField,
  InvalidValue,

  NotYetSampled,
  RegistryFrozen,
  NoMatch,
  UnknownGroup,
  NoValidMeasurementYet,
  MissingInitParameter,
  UnknownPlatform,
  CycleDetected,
  UnknownExtractorTarget,
  PartBindingError,
  EpisodeAlreadyDone,
  SpaceViolation,
  IoError,
  UnknownMetricInput,
  MetricCycle,
  UnknownMetric,
  MetricKindMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// An error raised while compiling one functor spec; `path` is that spec's
/// config location.
class SpecError : public Error {
 public:
  SpecError(ErrorCode code, const std::string& message, std::string path)
      : Error(code, message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace envforge
