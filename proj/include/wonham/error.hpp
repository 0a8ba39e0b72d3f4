#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wonham {

enum class ErrorKind {
  InvalidArgument,
  NotSquare,
  NegativeOffDiagonal,
  RowSumNonZero,
  NotBlockDecomposable,
  NotIrreducible,
  InvalidProbability,
  LengthMismatch,
  ZeroVector,
  AllZero,
  DegenerateMass,
  TooLarge,
  NotAbsolutelyContinuous,
  ClassNotIrreducible,
  HorizonTooShort,
  DegenerateInit,
  ConfigInvalid,
  ExperimentFailed,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wonham
