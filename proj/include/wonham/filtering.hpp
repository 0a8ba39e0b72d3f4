#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "wonham/markov.hpp"
#include "wonham/observation.hpp"

namespace wonham {

/// One grid step of the discretized filter: exact semigroup prediction with
/// exp(Q^T dt) followed by an exact Bayes correction with the Gaussian
/// likelihood of the increment. Everything that depends only on (Q, h, sigma,
/// dt) is computed once here.
class SplitStepScheme {
 public:
  SplitStepScheme(const GeneratorMatrix& q, const ObservationModel& model, double dt);

  std::size_t size() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
  double dt() const noexcept { return dt_; }
  /// exp(Q dt); the filter predicts with its transpose.
  const Matrix& transition() const noexcept { return transition_; }
  const ObservationModel& model() const noexcept { return model_; }

  Vector predict(const Vector& pi) const { return transition_.transpose() * pi; }
  /// Likelihood weights exp(e_i - max e) for increment dy; returns max e.
  double likelihood(double dy, Vector& weights) const;

 private:
  Matrix transition_;
  ObservationModel model_;
  Vector drift_;  // h_i^2 dt / (2 sigma^2)
  Vector gain_;   // h_i / sigma^2
  double dt_;
};

struct FilterStep {
  Vector pi;
  double log_mass_increment = 0.0;
};

/// Throws DegenerateMass if the corrected mass underflows.
FilterStep wonham_step(const SplitStepScheme& scheme, const Vector& pi, double dy);
FilterStep wonham_step(const ProbabilityVector& pi, double dy, double dt, const GeneratorMatrix& q,
                       const ObservationModel& model);

struct FilterTrajectory {
  double dt = 0.0;
  std::vector<Vector> pis;         // pis[k] is the filter at t = k dt
  std::vector<double> log_mass;    // accumulated log normalization

  std::size_t size() const noexcept { return pis.size(); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
};

FilterTrajectory run_filter(const ProbabilityVector& init, const ObservationPath& obs,
                            const GeneratorMatrix& q, const ObservationModel& model);
FilterTrajectory run_filter(const SplitStepScheme& scheme, const Vector& init,
                            const ObservationPath& obs);

/// Columns: t, pi_1..pi_n, log_mass.
void write_csv(std::ostream& out, const FilterTrajectory& traj);

/// Runs a reference filter and a second filter on the same increments while
/// tracking their difference as its own vector, so the distance keeps full
/// relative precision long after it has fallen below the rounding level of
/// the probabilities themselves.
class FilterPair {
 public:
  FilterPair(const SplitStepScheme& scheme, const Vector& reference_init, const Vector& other_init);

  void step(double dy);

  const Vector& reference() const noexcept { return reference_; }
  /// other - reference.
  const Vector& difference() const noexcept { return difference_; }
  Vector other() const { return reference_ + difference_; }
  double l1_distance() const { return difference_.cwiseAbs().sum(); }

 private:
  const SplitStepScheme* scheme_;
  Vector reference_;
  Vector difference_;
  Vector weights_;
};

/// Unnormalized solution operator of the discretized Zakai equation over a
/// window, stored as matrix * exp(log_scale).
struct ZakaiPropagator {
  Matrix matrix;
  double log_scale = 0.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  Matrix value() const { return matrix * std::exp(log_scale); }
  /// J v up to the common factor exp(log_scale).
  Vector apply(const Vector& v) const { return matrix * v; }
};

/// Composition: (later * earlier) is the propagator over the concatenated window.
ZakaiPropagator operator*(const ZakaiPropagator& later, const ZakaiPropagator& earlier);

/// Column j is the unnormalized filter started from delta_j.
ZakaiPropagator zakai_propagator(const SplitStepScheme& scheme, const ObservationPath& window);
ZakaiPropagator zakai_propagator(const ObservationPath& window, const GeneratorMatrix& q,
                                 const ObservationModel& model);

/// rho(j, i) = P(X_0 = a_j | Y_[0,t], X_t = a_i); columns are conditional laws.
struct SmootherMatrix {
  Matrix rho;

  static SmootherMatrix identity(std::size_t n);
  std::size_t size() const noexcept { return static_cast<std::size_t>(rho.rows()); }
  /// max over (j, k, l) of |rho_jk - rho_jl|.
  double spread() const;
  /// argmax_i rho(j, i), lowest index on ties.
  std::size_t argmax_column(std::size_t j) const;
  /// argmin_i rho(j, i), lowest index on ties.
  std::size_t argmin_column(std::size_t j) const;
};

struct SmootherStep {
  SmootherMatrix rho;
  bool used_floor = false;
};

inline constexpr double kDefaultSmootherFloor = 1e-12;

/// One explicit step of d rho_ji/dt = sum_{r != i} (lambda_ri pi(r) / pi(i)) (rho_jr - rho_ji)
/// with pi(i) floored. See the implementation for the integrating factor.
SmootherStep smoother_step(const SmootherMatrix& rho, const Vector& pi, const GeneratorMatrix& q,
                           double dt, double floor = kDefaultSmootherFloor);

struct SmootherOptions {
  double floor = kDefaultSmootherFloor;
  /// Fraction of steps allowed to hit the floor before the run is flagged.
  double max_floor_fraction = 0.01;
};

struct SmootherRun {
  FilterTrajectory filter;
  std::vector<SmootherMatrix> rhos;  // rhos[k] at t = k dt
  std::size_t floor_steps = 0;
  bool floor_dominates = false;
};

/// Runs the filter from `init` and the smoother ODE alongside it.
SmootherRun run_smoother(const ProbabilityVector& init, const ObservationPath& obs,
                         const GeneratorMatrix& q, const ObservationModel& model,
                         const SmootherOptions& options = {});

inline constexpr std::size_t kMaxAugmentedStates = 50;

/// Joint conditional laws of (X_0, X_t): joints[k](j, i) = P(X_0 = a_j, X_t = a_i | Y_[0, k dt]).
struct AugmentedTrajectory {
  double dt = 0.0;
  std::vector<Matrix> joints;

  std::size_t size() const noexcept { return joints.size(); }
  /// Law of X_t (column sums).
  Vector marginal(std::size_t k) const;
  /// Conditional law of X_0 given X_t = a_i in column i.
  Matrix initial_given_current(std::size_t k) const;
  /// P(X_0 = a_j | Y_[0,t]) (row sums).
  Vector initial_marginal(std::size_t k) const;
};

/// Filter of the pair chain (X_0, X_t): generator I (x) Q acting on the second
/// coordinate, observation h lifted to it. Throws TooLarge for n > 50.
AugmentedTrajectory augmented_filter(const ProbabilityVector& init, const ObservationPath& obs,
                                     const GeneratorMatrix& q, const ObservationModel& model);

/// CSV with columns t, j, i, rho for every recorded snapshot.
void write_csv(std::ostream& out, const std::vector<SmootherMatrix>& rhos, double dt,
               std::size_t every = 1);

}  // namespace wonham
