#pragma once

#include <limits>

#include "wonham/markov.hpp"

namespace wonham {

/// Nonnegative real or +infinity.
class ExtendedReal {
 public:
  static ExtendedReal finite(double v) { return ExtendedReal(v); }
  static ExtendedReal infinity() { return ExtendedReal(std::numeric_limits<double>::infinity()); }

  bool is_infinite() const noexcept { return value_ == std::numeric_limits<double>::infinity(); }
  /// +inf when infinite.
  double value() const noexcept { return value_; }

 private:
  explicit ExtendedReal(double v) : value_(v) {}
  double value_;
};

/// sum_i |p_i - q_i|. This is twice the total-variation distance.
double l1_distance(const Vector& p, const Vector& q);

/// Hilbert projective metric on the nonnegative orthant.
ExtendedReal hilbert_metric(const Vector& p, const Vector& q);

/// min over (i, j, k, l) of A_ik A_jl / (A_il A_jk), skipping zero denominators.
double birkhoff_psi(const Matrix& a);
/// (1 - sqrt(psi)) / (1 + sqrt(psi)).
double birkhoff_tau(const Matrix& a);

}  // namespace wonham
