#include "envforge/error.hpp"

#include <array>
#include <utility>

namespace envforge {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 30> kNames{{
    {ErrorCode::FileNotFound, "FileNotFound"},
    {ErrorCode::ParseError, "ParseError"},
    {ErrorCode::IncludeCycle, "IncludeCycle"},
    {ErrorCode::UnknownFunctor, "UnknownFunctor"},
    {ErrorCode::MissingField, "MissingField"},
    {ErrorCode::TypeMismatch, "TypeMismatch"},
    {ErrorCode::UnknownUnit, "UnknownUnit"},
    {ErrorCode::DimensionMismatch, "DimensionMismatch"},
    {ErrorCode::UnknownReference, "UnknownReference"},
    {ErrorCode::UnknownPartGroup, "UnknownPartGroup"},
    {ErrorCode::UnknownHyperparameter, "UnknownHyperparameter"},
    {ErrorCode::UnknownField, "UnknownField"},
    {ErrorCode::InvalidValue, "InvalidValue"},
    {ErrorCode::NotYetSampled, "NotYetSampled"},
    {ErrorCode::RegistryFrozen, "RegistryFrozen"},
    {ErrorCode::NoMatch, "NoMatch"},
    {ErrorCode::UnknownGroup, "UnknownGroup"},
    {ErrorCode::NoValidMeasurementYet, "NoValidMeasurementYet"},
    {ErrorCode::MissingInitParameter, "MissingInitParameter"},
    {ErrorCode::UnknownPlatform, "UnknownPlatform"},
    {ErrorCode::CycleDetected, "CycleDetected"},
    {ErrorCode::UnknownExtractorTarget, "UnknownExtractorTarget"},
    {ErrorCode::PartBindingError, "PartBindingError"},
    {ErrorCode::EpisodeAlreadyDone, "EpisodeAlreadyDone"},
    {ErrorCode::SpaceViolation, "SpaceViolation"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::UnknownMetricInput, "UnknownMetricInput"},
    {ErrorCode::MetricCycle, "MetricCycle"},
    {ErrorCode::UnknownMetric, "UnknownMetric"},
    {ErrorCode::MetricKindMismatch, "MetricKindMismatch"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace envforge
