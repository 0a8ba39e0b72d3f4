#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wonham/error.hpp"
#include "wonham/rng.hpp"

namespace wonham {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance on generator row sums accepted by GeneratorMatrix::validate.
inline constexpr double kRowSumTolerance = 1e-9;

/// Transition-intensity matrix: nonnegative off-diagonal rates, zero row sums.
class GeneratorMatrix {
 public:
  /// Validates `raw` and removes the residual row-sum drift from the diagonal.
  /// Throws NotSquare, NegativeOffDiagonal or RowSumNonZero.
  static GeneratorMatrix validate(const Matrix& raw, std::vector<std::string> labels = {});

  std::size_t size() const noexcept { return static_cast<std::size_t>(rates_.rows()); }
  const Matrix& rates() const noexcept { return rates_; }
  double operator()(std::size_t i, std::size_t j) const {
    return rates_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  /// Total exit rate -lambda_ii.
  double exit_rate(std::size_t i) const { return -(*this)(i, i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Restriction to the given states, in the given order. The states must be
  /// closed under the dynamics or the result fails validation.
  GeneratorMatrix restrict_to(const std::vector<std::size_t>& states) const;

 private:
  GeneratorMatrix(Matrix rates, std::vector<std::string> labels)
      : rates_(std::move(rates)), labels_(std::move(labels)) {}

  Matrix rates_;
  std::vector<std::string> labels_;
};

/// Nonnegative vector summing to one.
class ProbabilityVector {
 public:
  /// Accepts entries >= 0 whose sum is within 1e-9 of one and rescales the sum
  /// to one. Throws InvalidProbability otherwise.
  static ProbabilityVector from(const Vector& raw);
  static ProbabilityVector uniform(std::size_t n);
  static ProbabilityVector point_mass(std::size_t n, std::size_t state);

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.size()); }
  const Vector& values() const noexcept { return p_; }
  double operator[](std::size_t i) const { return p_(static_cast<Eigen::Index>(i)); }

 private:
  explicit ProbabilityVector(Vector p) : p_(std::move(p)) {}
  Vector p_;
};

struct ClassDecomposition {
  /// Disjoint state sets, each sorted ascending, ordered by their smallest state.
  std::vector<std::vector<std::size_t>> classes;
  std::vector<GeneratorMatrix> sub_generators;
  std::vector<bool> irreducible;

  std::size_t class_count() const noexcept { return classes.size(); }
  /// Class index of each state.
  std::vector<std::size_t> class_of_states(std::size_t n) const;

  /// Builds a decomposition from user-supplied per-state class labels. Throws
  /// NotBlockDecomposable if a positive rate connects two different classes.
  static ClassDecomposition from_labels(const GeneratorMatrix& q,
                                        const std::vector<std::size_t>& labels);
};

/// Closed communicating classes of `q`. Throws NotBlockDecomposable when some
/// state can leave its strongly connected component (a transient state).
ClassDecomposition decompose_classes(const GeneratorMatrix& q);

bool is_irreducible(const GeneratorMatrix& q);

/// Stationary law of an irreducible generator by a bordered linear solve.
ProbabilityVector invariant_measure(const GeneratorMatrix& q);

/// exp(Q dt) by scaling and squaring of a Taylor polynomial.
Matrix transition_matrix(const GeneratorMatrix& q, double dt);

/// Matrix exponential of an arbitrary square matrix (same algorithm, no
/// clamping). Exposed for the propagator and moment code.
Matrix expm(const Matrix& a);

struct ChainPath {
  std::vector<double> jump_times;   // strictly increasing, inside (0, horizon]
  std::vector<std::size_t> states;  // states.size() == jump_times.size() + 1
  double horizon = 0.0;

  std::size_t jump_count() const noexcept { return jump_times.size(); }
  std::size_t state_at(double t) const;
  /// Integral of f(X_s) over [a, b], exact for the piecewise-constant path.
  double integrate(const Vector& f, double a, double b) const;
};

/// Exact jump-by-jump simulation on [0, horizon] with X_0 drawn from `initial`.
ChainPath sample_path(const GeneratorMatrix& q, const ProbabilityVector& initial,
                      double horizon, Rng& rng);

/// Samples an index from a probability vector.
std::size_t sample_index(const Vector& p, Rng& rng);

}  // namespace wonham
