#include "wonham/error.hpp"

namespace wonham {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorKind::RowSumNonZero: return "RowSumNonZero";
    case ErrorKind::NotBlockDecomposable: return "NotBlockDecomposable";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::DegenerateMass: return "DegenerateMass";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::NotAbsolutelyContinuous: return "NotAbsolutelyContinuous";
    case ErrorKind::ClassNotIrreducible: return "ClassNotIrreducible";
    case ErrorKind::HorizonTooShort: return "HorizonTooShort";
    case ErrorKind::DegenerateInit: return "DegenerateInit";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::ExperimentFailed: return "ExperimentFailed";
  }
  return "Unknown";
}

}  // namespace wonham
