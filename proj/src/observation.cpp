#include "wonham/observation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "wonham/csv.hpp"

namespace wonham {

ObservationModel ObservationModel::make(Vector h, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::InvalidArgument, "observation noise sigma must be positive");
  }
  if (!h.allFinite()) throw Error(ErrorKind::InvalidArgument, "h must be finite");
  return ObservationModel{std::move(h), sigma};
}

ObservationPath ObservationPath::window(std::size_t first, std::size_t length) const {
  if (first + length > increments.size()) {
    throw Error(ErrorKind::InvalidArgument, "observation window exceeds the record");
  }
  ObservationPath out;
  out.dt = dt;
  out.increments.assign(increments.begin() + static_cast<std::ptrdiff_t>(first),
                        increments.begin() + static_cast<std::ptrdiff_t>(first + length));
  return out;
}

int JumpObservation::value_at(double t) const {
  const auto flips = std::upper_bound(jump_times.begin(), jump_times.end(), t) - jump_times.begin();
  return (flips % 2 == 0) ? initial_value : 1 - initial_value;
}

std::size_t grid_steps(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "grid needs dt > 0 and horizon >= 0");
  }
  const double steps = std::round(horizon / dt);
  if (std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
    throw Error(ErrorKind::InvalidArgument, "dt does not divide the horizon");
  }
  return static_cast<std::size_t>(steps);
}

ObservationPath synthesize_observations(const ChainPath& path, const ObservationModel& model,
                                        double dt, Rng& rng) {
  if (model.size() != 0 && !path.states.empty() &&
      *std::max_element(path.states.begin(), path.states.end()) >= model.size()) {
    throw Error(ErrorKind::LengthMismatch, "h is shorter than the state space of the path");
  }
  const std::size_t steps = grid_steps(path.horizon, dt);
  ObservationPath obs;
  obs.dt = dt;
  obs.increments.resize(steps);
  const double noise = model.sigma * std::sqrt(dt);
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = static_cast<double>(k) * dt;
    const double b = k + 1 == steps ? path.horizon : static_cast<double>(k + 1) * dt;
    obs.increments[k] = path.integrate(model.h, a, b) + noise * standard_normal(rng);
  }
  return obs;
}

JumpObservation noiseless_indicator_observation(const ChainPath& path,
                                                const std::vector<std::size_t>& indicator_states) {
  auto member = [&](std::size_t s) {
    return std::find(indicator_states.begin(), indicator_states.end(), s) !=
           indicator_states.end();
  };
  JumpObservation obs;
  obs.horizon = path.horizon;
  obs.initial_value = member(path.states.front()) ? 1 : 0;
  for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
    if (member(path.states[k]) != member(path.states[k + 1])) {
      obs.jump_times.push_back(path.jump_times[k]);
    }
  }
  return obs;
}

void write_csv(std::ostream& out, const ObservationPath& obs) {
  out << "k,t,dY\n";
  for (std::size_t k = 0; k < obs.increments.size(); ++k) {
    out << k << ',' << csv_number(static_cast<double>(k) * obs.dt) << ','
        << csv_number(obs.increments[k]) << '\n';
  }
}

}  // namespace wonham
