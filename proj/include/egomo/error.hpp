#pragma once

#include <stdexcept>
#include <string>

namespace egomo {

enum class Errc {
  NonPositiveDepth,
  GridTooLarge,
  DimensionMismatch,
  TooFewMeasurements,
  DegenerateSystem,
  PatchUnderdetermined,
  EmptyField,
  DegenerateField,
  InsufficientData,
  LengthMismatch,
  EmptyMask,
  FileNotFound,
  UnsupportedFormat,
  InconsistentDimensions,
  BadMagic,
  TruncatedFile,
  ParseError,
  UnknownConstraint,
  InvalidArgument,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewMeasurements: return "TooFewMeasurements";
    case Errc::DegenerateSystem: return "DegenerateSystem";
    case Errc::PatchUnderdetermined: return "PatchUnderdetermined";
    case Errc::EmptyField: return "EmptyField";
    case Errc::DegenerateField: return "DegenerateField";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::InconsistentDimensions: return "InconsistentDimensions";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownConstraint: return "UnknownConstraint";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace egomo
