#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wonham/filtering.hpp"
#include "wonham/markov.hpp"
#include "wonham/observation.hpp"
#include "wonham/parallel.hpp"

namespace wonham {

/// -sum_r mu_r min_{i != r} lambda_ri. Throws NotIrreducible.
double bound_mu_row(const GeneratorMatrix& q);

/// -2 min_{p != q} sqrt(lambda_pq lambda_qp); zero when any pair has a zero rate.
double bound_geo(const GeneratorMatrix& q);

struct Prefactors {
  double a = 0.0;  // n sum_j nu_j / beta_j
  double b = 0.0;  // n^2 max(nu/beta) max(beta/nu); +inf unless nu ~ beta
};

/// Throws NotAbsolutelyContinuous when nu_j > 0 = beta_j for some j.
Prefactors prefactors(const ProbabilityVector& nu, const ProbabilityVector& beta);

/// Smallest distance treated as nonzero when taking logarithms.
inline constexpr double kDistanceFloor = 1e-300;

struct MonteCarloOptions {
  double horizon = 10.0;
  double dt = 1e-3;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct LyapunovTrial {
  double slope = 0.0;
  std::size_t points = 0;     // grid points in the regression window
  bool truncated = false;     // distance reached the floor before the horizon
  bool degenerate = false;    // distance at the floor from the start
  std::vector<double> distances;  // L1 distance at each requested report time
};

struct LyapunovEstimate {
  double exponent = 0.0;   // -inf when every trial is degenerate
  double std_error = 0.0;
  std::size_t trials = 0;
  std::size_t degenerate_trials = 0;
  double horizon = 0.0;
  bool all_degenerate = false;
  std::vector<double> report_times;
  std::vector<MeanEstimate> mean_distance;  // per report time
  std::vector<LyapunovTrial> per_trial;
};

/// Per trial: X ~ nu, Y from X, filters from nu and beta on the same Y; the
/// slope of log ||pi^nu - pi^beta||_1 against t over [T/2, T] (or over
/// [t_u/2, t_u) when the distance hits the floor at t_u).
LyapunovEstimate lyapunov_estimate(const GeneratorMatrix& q, const ObservationModel& model,
                                   const ProbabilityVector& nu, const ProbabilityVector& beta,
                                   const MonteCarloOptions& options,
                                   const std::vector<double>& report_times = {});

/// Average of max(-1, log tau(J)) over `blocks` consecutive unit-window
/// propagators along one trajectory started from nu.
MeanEstimate contraction_rate(const GeneratorMatrix& q, const ObservationModel& model,
                              const ProbabilityVector& nu, double dt, std::size_t blocks,
                              std::uint64_t seed);

struct TimeAverage {
  std::vector<Vector> per_trial;  // (1/T) int_0^T pi^beta_t dt
  Vector mean;
};

/// Time-averaged wrong-initialized filter; data generated under nu.
TimeAverage filter_time_average(const GeneratorMatrix& q, const ObservationModel& model,
                                const ProbabilityVector& nu, const ProbabilityVector& beta,
                                const MonteCarloOptions& options);

/// h_j^T diag(mu^j) Lambda_j^power h_j.
double class_moment(const GeneratorMatrix& qj, const Vector& hj, std::size_t power);

/// d(r) = E (int_0^r h(X_s) ds)^2 for the stationary chain, by adaptive
/// Simpson quadrature of 2 int_0^r (r - v) h^T diag(mu) exp(Lambda v) h dv.
double d_moment(const GeneratorMatrix& qj, const Vector& hj, double r, double rel_tol = 1e-10);

struct PairSeparation {
  std::size_t j = 0;
  std::size_t k = 0;
  double mean_sep = 0.0;
  std::vector<double> moment_seps;  // q = 0 .. n_j + n_k - 1
  bool satisfied = false;
};

struct IdentifiabilityReport {
  double tolerance = 1e-9;
  std::vector<PairSeparation> pairs;  // ordered pairs j != k

  bool satisfied() const;
};

/// Throws ClassNotIrreducible when a class is not irreducible.
IdentifiabilityReport check_identifiability(const ClassDecomposition& decomp,
                                            const ObservationModel& model, double tol = 1e-9);

/// Restriction of h to the states of class `index`.
Vector class_observation(const ClassDecomposition& decomp, const ObservationModel& model,
                         std::size_t index);

struct ClassCentroids {
  std::vector<double> r_grid;
  double sigma = 1.0;
  std::vector<Vector> centroids;  // (h_j^T mu^j, d_j(r_1), ..., d_j(r_l))
};

ClassCentroids class_centroids(const ClassDecomposition& decomp, const ObservationModel& model,
                               const std::vector<double>& r_grid);

struct Classification {
  std::size_t class_index = 0;
  Vector statistics;  // (Y_T / T, Z(r_1)/N_1 - r_1 sigma^2, ...)
  Vector distances;   // Euclidean distance to each centroid
};

inline constexpr std::size_t kDefaultMinBlocks = 50;

/// Nearest-centroid class of the observed record. Throws HorizonTooShort when
/// some r has fewer than `min_blocks` whole blocks.
Classification classify_class(const ObservationPath& obs, const ClassCentroids& centroids,
                              std::size_t min_blocks = kDefaultMinBlocks);
Classification classify_class(const ObservationPath& obs, const ClassDecomposition& decomp,
                              const ObservationModel& model, const std::vector<double>& r_grid,
                              std::size_t min_blocks = kDefaultMinBlocks);

}  // namespace wonham
