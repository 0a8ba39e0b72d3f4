#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wonham/markov.hpp"
#include "wonham/observation.hpp"
#include "wonham/parallel.hpp"

namespace wonham {

/// Four-state cycle 1 -> 2 -> 3 -> 4 -> 1 at unit rates, observed through the
/// indicator of {1, 3} (0-based {0, 2}).
struct CyclicModel {
  GeneratorMatrix generator;
  std::vector<std::size_t> indicator_states;
};

CyclicModel build_cyclic_model();

/// (pi(1), pi(2)) with pi(3) = y - pi(1) and pi(4) = (1 - y) - pi(2).
struct CyclicFilterState {
  int y = 0;
  double pi1 = 0.0;
  double pi2 = 0.0;

  double pi3() const noexcept { return y - pi1; }
  double pi4() const noexcept { return (1 - y) - pi2; }
  Vector full() const;
};

/// Filter value on [start, next jump).
struct CyclicInterval {
  double start = 0.0;
  CyclicFilterState state;
};

/// Event-driven filter for the noiseless indicator observation of the cyclic
/// model: constant between jumps of Y, updated at each jump with dY = +-1.
/// Throws DegenerateInit when the initial conditional law is 0/0.
std::vector<CyclicInterval> exact_jump_filter(const ProbabilityVector& nu,
                                              const JumpObservation& obs);

/// Filter state in force at time t.
CyclicFilterState state_at(const std::vector<CyclicInterval>& trajectory, double t);

/// Closed-form value of the filter on the k-th inter-jump interval (k = 0 is
/// [0, tau_1)), a period-4 sequence determined by Y_0 and nu.
CyclicFilterState tabulated_state(const ProbabilityVector& nu, int y0, std::size_t k);

struct SupportPoint {
  double pi1 = 0.0;
  double pi2 = 0.0;
  double mass = 0.0;
};

/// The eight (pi(1), pi(2)) values carrying the stationary law of the filter
/// and their masses: (nu1 + nu3)/4 for the first four, (nu2 + nu4)/4 for the
/// rest. A group with zero total weight gets zero values and zero mass.
std::array<SupportPoint, 8> invariant_support(const ProbabilityVector& nu);

struct TableRow {
  std::size_t interval = 0;
  int y = 0;
  double pi1 = 0.0;
  double pi2 = 0.0;
  double expected_pi1 = 0.0;
  double expected_pi2 = 0.0;
  bool match = false;
};

/// Runs exact_jump_filter on a synthetic record with Y_0 = y0 and `intervals`
/// inter-jump intervals and compares with tabulated_state at tolerance `tol`.
std::vector<TableRow> reproduce_table(const ProbabilityVector& nu, int y0, std::size_t intervals,
                                      double tol = 1e-14);

/// Columns: table, interval, Y, pi1, pi2, expected_pi1, expected_pi2, match.
void write_tables_csv(std::ostream& out, const std::vector<TableRow>& y0_one,
                      const std::vector<TableRow>& y0_zero);

struct InstabilityReport {
  std::vector<double> times;
  std::vector<MeanEstimate> mean_distance;  // E ||pi^nu_t - pi^beta_t||_1
  /// Long-run mean distance implied by the support points of the two filters.
  double predicted_gap = 0.0;
};

/// L1 distance between the two filters' support points on each Y_0 branch,
/// weighted by P(Y_0 = 1) = nu1 + nu3 and P(Y_0 = 0).
double predicted_instability_gap(const ProbabilityVector& nu, const ProbabilityVector& beta);

/// Both exact filters on the same noiseless records generated under nu.
InstabilityReport instability_demo(const ProbabilityVector& nu, const ProbabilityVector& beta,
                                   double horizon, std::size_t trials, std::uint64_t seed,
                                   const std::vector<double>& times, unsigned threads = 1);

}  // namespace wonham
