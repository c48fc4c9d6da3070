#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace heavytail {

enum class ErrorKind {
  ParameterDomain,
  Domain,
  UnsupportedEvaluation,
  InfiniteMoment,
  DataDomain,
  NonConvergence,
  ThresholdDegeneracy,
  Incomparable,
  EmptyInput,
  InsufficientTail,
  Resolution,
  Shape,
  DegenerateScan,
  BoundUndefined,
  Envelope,
  UnsupportedMarginal,
  UnboundedBase,
  Validation,
  Io,
  Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParameterDomain: return "parameter-domain";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::UnsupportedEvaluation: return "unsupported-evaluation";
    case ErrorKind::InfiniteMoment: return "infinite-moment";
    case ErrorKind::DataDomain: return "data-domain";
    case ErrorKind::NonConvergence: return "nonconvergence";
    case ErrorKind::ThresholdDegeneracy: return "threshold-degeneracy";
    case ErrorKind::Incomparable: return "incomparable";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::InsufficientTail: return "insufficient-tail";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::DegenerateScan: return "degenerate-scan";
    case ErrorKind::BoundUndefined: return "bound-undefined";
    case ErrorKind::Envelope: return "envelope";
    case ErrorKind::UnsupportedMarginal: return "unsupported-marginal";
    case ErrorKind::UnboundedBase: return "unbounded-base";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

/// Library-wide exception. `kind()` classifies the failure; the message
/// names the offending field, row or parameter.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace heavytail
