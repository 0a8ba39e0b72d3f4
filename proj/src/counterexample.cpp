#include "wonham/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "wonham/csv.hpp"
#include "wonham/metrics.hpp"

namespace wonham {

CyclicModel build_cyclic_model() {
  Matrix rates(4, 4);
  rates << -1, 1, 0, 0,
            0, -1, 1, 0,
            0, 0, -1, 1,
            1, 0, 0, -1;
  return CyclicModel{GeneratorMatrix::validate(rates), {0, 2}};
}

Vector CyclicFilterState::full() const {
  Vector v(4);
  v << pi1, pi2, pi3(), pi4();
  return v;
}

namespace {

void require_four(const ProbabilityVector& nu) {
  if (nu.size() != 4) {
    throw Error(ErrorKind::LengthMismatch, "the cyclic model has four states");
  }
}

CyclicFilterState initial_state(const ProbabilityVector& nu, int y0) {
  CyclicFilterState s;
  s.y = y0;
  if (y0 == 1) {
    const double mass = nu[0] + nu[2];
    if (!(mass > 0.0)) {
      throw Error(ErrorKind::DegenerateInit, "Y_0 = 1 but nu puts no mass on states 1 and 3");
    }
    s.pi1 = nu[0] / mass;
  } else {
    const double mass = nu[1] + nu[3];
    if (!(mass > 0.0)) {
      throw Error(ErrorKind::DegenerateInit, "Y_0 = 0 but nu puts no mass on states 2 and 4");
    }
    s.pi2 = nu[1] / mass;
  }
  return s;
}

}  // namespace

std::vector<CyclicInterval> exact_jump_filter(const ProbabilityVector& nu,
                                              const JumpObservation& obs) {
  require_four(nu);
  std::vector<CyclicInterval> out;
  out.reserve(obs.jump_times.size() + 1);
  out.push_back({0.0, initial_state(nu, obs.initial_value)});
  for (double tau : obs.jump_times) {
    const CyclicFilterState& prev = out.back().state;
    const double y = prev.y;
    const double dy = 1.0 - 2.0 * y;
    CyclicFilterState next;
    next.y = prev.y == 1 ? 0 : 1;
    next.pi1 = prev.pi1 + (1.0 - prev.pi2) * (1.0 - y) * dy + prev.pi1 * y * dy;
    next.pi2 = prev.pi2 - prev.pi2 * (1.0 - y) * dy - prev.pi1 * y * dy;
    out.push_back({tau, next});
  }
  return out;
}

CyclicFilterState state_at(const std::vector<CyclicInterval>& trajectory, double t) {
  auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                             [](double value, const CyclicInterval& iv) { return value < iv.start; });
  if (it == trajectory.begin()) return trajectory.front().state;
  return std::prev(it)->state;
}

CyclicFilterState tabulated_state(const ProbabilityVector& nu, int y0, std::size_t k) {
  require_four(nu);
  CyclicFilterState s;
  const std::size_t phase = k % 4;
  if (y0 == 1) {
    const double first = nu[0] / (nu[0] + nu[2]);
    const double second = nu[2] / (nu[0] + nu[2]);
    s.y = (k % 2 == 0) ? 1 : 0;
    switch (phase) {
      case 0: s.pi1 = first; break;
      case 1: s.pi2 = first; break;
      case 2: s.pi1 = second; break;
      default: s.pi2 = second; break;
    }
  } else {
    const double first = nu[1] / (nu[1] + nu[3]);
    const double second = nu[3] / (nu[1] + nu[3]);
    // 2 -> 3 and 4 -> 1: after the first jump, state 1 carries the weight of 4.
    s.y = (k % 2 == 0) ? 0 : 1;
    switch (phase) {
      case 0: s.pi2 = first; break;
      case 1: s.pi1 = second; break;
      case 2: s.pi2 = second; break;
      default: s.pi1 = first; break;
    }
  }
  return s;
}

std::array<SupportPoint, 8> invariant_support(const ProbabilityVector& nu) {
  require_four(nu);
  std::array<SupportPoint, 8> out{};
  const double odd = nu[0] + nu[2];
  const double even = nu[1] + nu[3];
  if (odd > 0.0) {
    const double a = nu[0] / odd;
    const double b = nu[2] / odd;
    out[0] = {a, 0.0, odd / 4.0};
    out[1] = {0.0, a, odd / 4.0};
    out[2] = {b, 0.0, odd / 4.0};
    out[3] = {0.0, b, odd / 4.0};
  }
  if (even > 0.0) {
    const double c = nu[1] / even;
    const double d = nu[3] / even;
    out[4] = {c, 0.0, even / 4.0};
    out[5] = {0.0, c, even / 4.0};
    out[6] = {d, 0.0, even / 4.0};
    out[7] = {0.0, d, even / 4.0};
  }
  return out;
}

std::vector<TableRow> reproduce_table(const ProbabilityVector& nu, int y0, std::size_t intervals,
                                      double tol) {
  JumpObservation obs;
  obs.initial_value = y0;
  for (std::size_t k = 1; k < intervals; ++k) obs.jump_times.push_back(static_cast<double>(k));
  obs.horizon = static_cast<double>(intervals);
  const auto trajectory = exact_jump_filter(nu, obs);

  std::vector<TableRow> rows;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const CyclicFilterState& got = trajectory[k].state;
    const CyclicFilterState want = tabulated_state(nu, y0, k);
    TableRow row;
    row.interval = k + 1;
    row.y = got.y;
    row.pi1 = got.pi1;
    row.pi2 = got.pi2;
    row.expected_pi1 = want.pi1;
    row.expected_pi2 = want.pi2;
    row.match = got.y == want.y && std::abs(got.pi1 - want.pi1) <= tol &&
                std::abs(got.pi2 - want.pi2) <= tol;
    rows.push_back(row);
  }
  return rows;
}

void write_tables_csv(std::ostream& out, const std::vector<TableRow>& y0_one,
                      const std::vector<TableRow>& y0_zero) {
  out << "table,interval,Y,pi1,pi2,expected_pi1,expected_pi2,match\n";
  auto emit = [&](int table, const std::vector<TableRow>& rows) {
    for (const auto& r : rows) {
      out << table << ',' << r.interval << ',' << r.y << ',' << csv_number(r.pi1) << ','
          << csv_number(r.pi2) << ',' << csv_number(r.expected_pi1) << ','
          << csv_number(r.expected_pi2) << ',' << (r.match ? "true" : "false") << '\n';
    }
  };
  emit(1, y0_one);
  emit(2, y0_zero);
}

double predicted_instability_gap(const ProbabilityVector& nu, const ProbabilityVector& beta) {
  require_four(nu);
  require_four(beta);
  double gap = 0.0;
  for (int y0 : {1, 0}) {
    const double weight = y0 == 1 ? nu[0] + nu[2] : nu[1] + nu[3];
    if (weight == 0.0) continue;
    // Every interval of the branch carries the same L1 gap (period-4 cycle).
    const Vector a = tabulated_state(nu, y0, 0).full();
    const Vector b = tabulated_state(beta, y0, 0).full();
    gap += weight * l1_distance(a, b);
  }
  return gap;
}

InstabilityReport instability_demo(const ProbabilityVector& nu, const ProbabilityVector& beta,
                                   double horizon, std::size_t trials, std::uint64_t seed,
                                   const std::vector<double>& times, unsigned threads) {
  require_four(nu);
  require_four(beta);
  if (trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  for (double t : times)
    if (t < 0.0 || t > horizon) {
      throw Error(ErrorKind::InvalidArgument, "report time outside the simulated horizon");
    }
  const CyclicModel model = build_cyclic_model();
  std::vector<std::vector<double>> per_trial(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    const ChainPath path = sample_path(model.generator, nu, horizon, rng);
    const JumpObservation obs = noiseless_indicator_observation(path, model.indicator_states);
    const auto right = exact_jump_filter(nu, obs);
    const auto wrong = exact_jump_filter(beta, obs);
    for (double t : times) {
      per_trial[i].push_back(l1_distance(state_at(right, t).full(), state_at(wrong, t).full()));
    }
  });
  InstabilityReport report;
  report.times = times;
  report.predicted_gap = predicted_instability_gap(nu, beta);
  for (std::size_t r = 0; r < times.size(); ++r) {
    std::vector<double> values;
    for (const auto& trial : per_trial) values.push_back(trial[r]);
    report.mean_distance.push_back(summarize(values));
  }
  return report;
}

}  // namespace wonham
