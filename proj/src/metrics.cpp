#include "wonham/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace wonham {

using Index = Eigen::Index;

double l1_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error(ErrorKind::LengthMismatch, "l1_distance: length mismatch");
  return (p - q).cwiseAbs().sum();
}

ExtendedReal hilbert_metric(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "hilbert_metric: length mismatch");
  }
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "hilbert_metric: vectors must be nonnegative");
  }
  if (!(p.array() > 0.0).any() || !(q.array() > 0.0).any()) {
    throw Error(ErrorKind::ZeroVector, "hilbert_metric: zero vector");
  }
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < p.size(); ++i) {
    if ((p(i) > 0.0) != (q(i) > 0.0)) return ExtendedReal::infinity();
    if (q(i) == 0.0) continue;
    const double ratio = p(i) / q(i);
    hi = std::max(hi, ratio);
    lo = std::min(lo, ratio);
  }
  const double spread = hi / lo;
  if (std::isnormal(lo) && std::isfinite(hi) && std::isfinite(spread)) {
    return ExtendedReal::finite(std::max(0.0, std::log(spread)));
  }
  // Ratios out of range: redo the scan on logarithms.
  double log_hi = -std::numeric_limits<double>::infinity();
  double log_lo = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < p.size(); ++i) {
    if (q(i) == 0.0) continue;
    const double log_ratio = std::log(p(i)) - std::log(q(i));
    log_hi = std::max(log_hi, log_ratio);
    log_lo = std::min(log_lo, log_ratio);
  }
  return ExtendedReal::finite(std::max(0.0, log_hi - log_lo));
}

double birkhoff_psi(const Matrix& a) {
  if ((a.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "birkhoff_psi: matrix must be nonnegative");
  }
  if (!(a.array() > 0.0).any()) throw Error(ErrorKind::AllZero, "birkhoff_psi: zero matrix");
  // Log-space scan so ill-scaled propagators neither overflow nor underflow.
  const Matrix logs = a.array().log().matrix();
  const Index rows = a.rows();
  const Index cols = a.cols();
  double best = 0.0;  // log psi; the (i = j) quadruples give exactly 0
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < rows; ++j)
      for (Index k = 0; k < cols; ++k)
        for (Index l = 0; l < cols; ++l) {
          if (a(i, l) == 0.0 || a(j, k) == 0.0) continue;
          if (a(i, k) == 0.0 || a(j, l) == 0.0) return 0.0;
          best = std::min(best, logs(i, k) + logs(j, l) - logs(i, l) - logs(j, k));
        }
  return std::exp(best);
}

double birkhoff_tau(const Matrix& a) {
  const double root = std::sqrt(birkhoff_psi(a));
  return (1.0 - root) / (1.0 + root);
}

}  // namespace wonham
