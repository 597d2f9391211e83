#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reefmap {

/// Every failure the library can report. The name of each enumerator is what
/// ends up in CLI error messages, so keep them stable.
enum class Errc : std::uint8_t {
  // core-model
  NonPositiveSpacing,
  DegenerateExtent,
  MalformedRaster,
  InvalidCatalog,
  // ingest
  MalformedRow,
  ProbabilityOutOfRange,
  MissingClassColumn,
  EmptyFile,
  TooFewPoints,
  OutOfRangeCoordinate,
  UnknownClass,
  // rasterize
  AllCollinear,
  LengthMismatch,
  GridMismatch,
  EmptyList,
  // annotate
  EmptyValues,
  BadPercentilePair,
  ClassMismatch,
  NonPositiveEpsilon,
  MissingClassRaster,
  NoOverlap,
  // dataset
  TileTooSmall,
  NoLabeledPixels,
  InvalidWeights,
  MissingMask,
  ExtraMask,
  SizeMismatch,
  LabelOutOfCatalog,
  BadNoiseRate,
  MalformedManifest,
  VerificationFailed,
  // metrics
  NoEvaluatedPixels,
  NoPresentClasses,
  // analytics
  EmptyInstance,
  NonPositiveArea,
  EmptySet,
  // synth / cli
  BadParameters,
  Io,
};

enum class ErrorCategory : std::uint8_t { Validation, Inconsistency, Io };

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveSpacing: return "NonPositiveSpacing";
    case Errc::DegenerateExtent: return "DegenerateExtent";
    case Errc::MalformedRaster: return "MalformedRaster";
    case Errc::InvalidCatalog: return "InvalidCatalog";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case Errc::MissingClassColumn: return "MissingClassColumn";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::OutOfRangeCoordinate: return "OutOfRangeCoordinate";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::AllCollinear: return "AllCollinear";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::EmptyList: return "EmptyList";
    case Errc::EmptyValues: return "EmptyValues";
    case Errc::BadPercentilePair: return "BadPercentilePair";
    case Errc::ClassMismatch: return "ClassMismatch";
    case Errc::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case Errc::MissingClassRaster: return "MissingClassRaster";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::TileTooSmall: return "TileTooSmall";
    case Errc::NoLabeledPixels: return "NoLabeledPixels";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::MissingMask: return "MissingMask";
    case Errc::ExtraMask: return "ExtraMask";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::LabelOutOfCatalog: return "LabelOutOfCatalog";
    case Errc::BadNoiseRate: return "BadNoiseRate";
    case Errc::MalformedManifest: return "MalformedManifest";
    case Errc::VerificationFailed: return "VerificationFailed";
    case Errc::NoEvaluatedPixels: return "NoEvaluatedPixels";
    case Errc::NoPresentClasses: return "NoPresentClasses";
    case Errc::EmptyInstance: return "EmptyInstance";
    case Errc::NonPositiveArea: return "NonPositiveArea";
    case Errc::EmptySet: return "EmptySet";
    case Errc::BadParameters: return "BadParameters";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Inconsistency = inputs are individually valid but do not fit together.
constexpr ErrorCategory errc_category(Errc code) noexcept {
  switch (code) {
    case Errc::GridMismatch:
    case Errc::ClassMismatch:
    case Errc::LengthMismatch:
    case Errc::MissingClassRaster:
    case Errc::NoOverlap:
    case Errc::MissingMask:
    case Errc::ExtraMask:
    case Errc::SizeMismatch:
    case Errc::LabelOutOfCatalog:
    case Errc::VerificationFailed:
      return ErrorCategory::Inconsistency;
    case Errc::Io:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return errc_category(code_); }

 private:
  Errc code_;
};

}  // namespace reefmap
