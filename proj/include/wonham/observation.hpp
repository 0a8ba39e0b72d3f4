#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "wonham/markov.hpp"

namespace wonham {

/// dY_t = h(X_t) dt + sigma dW_t.
struct ObservationModel {
  Vector h;
  double sigma = 1.0;

  /// Throws InvalidArgument unless sigma > 0 and h is finite.
  static ObservationModel make(Vector h, double sigma);
  std::size_t size() const noexcept { return static_cast<std::size_t>(h.size()); }
};

/// Increments of Y on a uniform grid: increments[k] = Y_{(k+1)dt} - Y_{k dt}.
struct ObservationPath {
  double dt = 0.0;
  std::vector<double> increments;

  std::size_t count() const noexcept { return increments.size(); }
  double horizon() const noexcept { return dt * static_cast<double>(increments.size()); }
  /// Sub-record of steps [first, first + length).
  ObservationPath window(std::size_t first, std::size_t length) const;
};

/// Pure-jump record of an indicator observation Y_t = 1{X_t in set}.
struct JumpObservation {
  int initial_value = 0;
  std::vector<double> jump_times;
  double horizon = 0.0;

  int value_at(double t) const;
};

/// Number of grid steps covering `horizon`; throws InvalidArgument when dt does
/// not divide the horizon to within 1e-9 relative.
std::size_t grid_steps(double horizon, double dt);

/// The drift integral of each cell is exact for the piecewise-constant path;
/// only the Brownian part is sampled.
ObservationPath synthesize_observations(const ChainPath& path, const ObservationModel& model,
                                        double dt, Rng& rng);

JumpObservation noiseless_indicator_observation(const ChainPath& path,
                                                const std::vector<std::size_t>& indicator_states);

/// CSV with header "k,t,dY"; t is the left end k*dt of the cell.
void write_csv(std::ostream& out, const ObservationPath& obs);

}  // namespace wonham
