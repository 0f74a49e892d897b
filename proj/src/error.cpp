#include "rvcp/error.hpp"

namespace rvcp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::domain_error: return "DomainError";
    case ErrorKind::degenerate_g: return "DegenerateG";
    case ErrorKind::all_zero_variance: return "AllZeroVariance";
    case ErrorKind::empty_population: return "EmptyPopulation";
    case ErrorKind::insufficient_calibration: return "InsufficientCalibration";
    case ErrorKind::missing_labels: return "MissingLabels";
    case ErrorKind::missing_sample: return "MissingSample";
    case ErrorKind::shape_mismatch: return "ShapeMismatch";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::header_mismatch: return "HeaderMismatch";
    case ErrorKind::io_error: return "IoError";
  }
  return "Unknown";
}

bool is_statistical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::degenerate_g:
    case ErrorKind::all_zero_variance:
    case ErrorKind::empty_population:
    case ErrorKind::insufficient_calibration:
      return true;
    default:
      return false;
  }
}

}  // namespace rvcp
