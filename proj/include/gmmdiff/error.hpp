#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gmmdiff {

enum class Errc {
  NonSymmetricCovariance,
  NotPositiveDefinite,
  WeightsDoNotSumToOne,
  InvalidWeight,
  DimensionMismatch,
  EmptyMixture,
  NegativeTime,
  ZeroScale,
  ParamsOutOfRange,
  TooFewSamples,
  InvalidHorizon,
  DeltaExceedsHorizon,
  InvalidStepCount,
  StepBudgetViolated,
  NegativeEpsilon,
  NonFiniteState,
  DimensionTooHigh,
  EmptyBatch,
  NoPointsInRegion,
  InvalidArgument,
  ParseError,
  IoError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NonSymmetricCovariance: return "NonSymmetricCovariance";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::WeightsDoNotSumToOne: return "WeightsDoNotSumToOne";
    case Errc::InvalidWeight: return "InvalidWeight";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyMixture: return "EmptyMixture";
    case Errc::NegativeTime: return "NegativeTime";
    case Errc::ZeroScale: return "ZeroScale";
    case Errc::ParamsOutOfRange: return "ParamsOutOfRange";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::InvalidHorizon: return "InvalidHorizon";
    case Errc::DeltaExceedsHorizon: return "DeltaExceedsHorizon";
    case Errc::InvalidStepCount: return "InvalidStepCount";
    case Errc::StepBudgetViolated: return "StepBudgetViolated";
    case Errc::NegativeEpsilon: return "NegativeEpsilon";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::DimensionTooHigh: return "DimensionTooHigh";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::NoPointsInRegion: return "NoPointsInRegion";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a stable error code.
///
/// `index()` holds the offending component index (spec validation), the
/// step index (NonFiniteState) or the minimal admissible step count
/// (StepBudgetViolated), depending on the code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::int64_t> index = std::nullopt)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), index_(index) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::int64_t> index() const noexcept { return index_; }

 private:
  Errc code_;
  std::optional<std::int64_t> index_;
};

}  // namespace gmmdiff
