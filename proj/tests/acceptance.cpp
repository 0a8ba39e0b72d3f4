// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wonham/counterexample.hpp"
#include "wonham/filtering.hpp"
#include "wonham/harness.hpp"
#include "wonham/metrics.hpp"
#include "wonham/stability.hpp"

using namespace wonham;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

GeneratorMatrix from_rates(const Matrix& off) {
  Matrix m = off;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, i) = 0.0;
    m(i, i) = -m.row(i).sum();
  }
  return GeneratorMatrix::validate(m);
}

GeneratorMatrix pair_generator(double rate) {
  Matrix m(2, 2);
  m << 0, rate, rate, 0;
  return from_rates(m);
}

GeneratorMatrix cyclic_generator() { return build_cyclic_model().generator; }

GeneratorMatrix random_generator(std::size_t n, Rng& rng, double lo, double hi) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) m(i, j) = lo + (hi - lo) * uniform01(rng);
  return from_rates(m);
}

ProbabilityVector skewed() { return ProbabilityVector::from(vec({0.7, 0.1, 0.1, 0.1})); }

// ---------------------------------------------------------------------------

void tables(Outcome& out) {
  const auto nu = skewed();
  const double a = nu[0] / (nu[0] + nu[2]), b = nu[2] / (nu[0] + nu[2]);
  const double c = nu[1] / (nu[1] + nu[3]), d = nu[3] / (nu[1] + nu[3]);
  // Columns of the two reference trajectories, repeating with period four.
  const double one[4][3] = {{1, a, 0}, {0, 0, a}, {1, b, 0}, {0, 0, b}};
  const double zero[4][3] = {{0, 0, c}, {1, c, 0}, {0, 0, d}, {1, d, 0}};
  std::size_t checked = 0;
  for (int y0 : {1, 0}) {
    JumpObservation obs;
    obs.initial_value = y0;
    for (int k = 1; k < 12; ++k) obs.jump_times.push_back(0.37 * k + 0.01 * k * k);
    obs.horizon = 10.0;
    const auto traj = exact_jump_filter(nu, obs);
    out.require(traj.size() == 12, "12 intervals");
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const auto& want = (y0 == 1 ? one : zero)[k % 4];
      const auto& got = traj[k].state;
      out.require(got.y == static_cast<int>(want[0]) && std::abs(got.pi1 - want[1]) <= 1e-14 &&
                      std::abs(got.pi2 - want[2]) <= 1e-14,
                  "entry y0=" + std::to_string(y0) + " k=" + std::to_string(k));
      ++checked;
    }
    for (const auto& row : reproduce_table(nu, y0, 12)) out.require(row.match, "library table row");
  }
  out.detail << "entries=" << checked;
}

void instability(Outcome& out) {
  const auto nu = skewed();
  const auto beta = ProbabilityVector::uniform(4);
  const auto demo = instability_demo(nu, beta, 100.0, 100, 2024, {100.0});
  const double noiseless = demo.mean_distance.back().mean;
  out.require(noiseless > 0.3, "noiseless mean distance > 0.3");

  const auto model = ObservationModel::make(vec({1, 0, 1, 0}), 1.0);
  MonteCarloOptions opt{100.0, 1e-3, 100, 2025, 1};
  const auto noisy = lyapunov_estimate(cyclic_generator(), model, nu, beta, opt, {100.0});
  const double contrast = noisy.mean_distance.back().mean;
  out.require(contrast < 0.05, "noisy mean distance < 0.05");
  out.detail << "noiseless=" << noiseless << " predicted_gap=" << demo.predicted_gap
             << " noisy=" << contrast;
}

void geometric_bound(Outcome& out) {
  const auto q = pair_generator(1.0);
  const auto model = ObservationModel::make(vec({0, 1}), 1.0);
  const auto nu = ProbabilityVector::point_mass(2, 0);
  const auto beta = ProbabilityVector::uniform(2);
  const double geo = bound_geo(q);
  const double a = prefactors(nu, beta).a;
  MonteCarloOptions opt{30.0, 1e-3, 200, 3, 1};
  const std::vector<double> times{1.0, 2.0, 4.0};
  const auto est = lyapunov_estimate(q, model, nu, beta, opt, times);
  out.require(geo == -2.0, "bound_geo = -2");
  out.require(est.exponent <= geo + 3.0 * est.std_error, "exponent <= -2 + 3 se");
  out.detail << "exponent=" << est.exponent << " se=" << est.std_error;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto& m = est.mean_distance[k];
    const double bound = a * std::exp(geo * times[k]);
    out.require(m.mean <= bound + 3.0 * m.std_error, "distance bound at t=" + std::to_string(times[k]));
    out.detail << " E|d|(" << times[k] << ")=" << m.mean << "<=" << bound;
  }
}

void mu_row_bound(Outcome& out) {
  Matrix off(3, 3);
  off << 0, 1, 1,
         0, 0, 1,
         1, 0, 0;
  const auto q = from_rates(off);
  const auto model = ObservationModel::make(vec({0, 1, 2}), 1.0);
  const double bound = bound_mu_row(q);
  MonteCarloOptions opt{30.0, 1e-3, 200, 4, 1};
  const auto est = lyapunov_estimate(q, model, ProbabilityVector::point_mass(3, 0),
                                     ProbabilityVector::uniform(3), opt);
  out.require(bound < 0.0, "bound_mu_row < 0");
  out.require(est.exponent <= bound + 3.0 * est.std_error, "exponent <= bound + 3 se");
  out.detail << "bound_mu_row=" << bound << " exponent=" << est.exponent << " se=" << est.std_error;
}

void ergodic_sign(Outcome& out) {
  const auto q = cyclic_generator();
  const auto model = ObservationModel::make(vec({1, 0, 1, 0}), 1.0);
  MonteCarloOptions opt{30.0, 1e-3, 200, 5, 1};
  const auto est = lyapunov_estimate(q, model, skewed(), ProbabilityVector::uniform(4), opt);
  out.require(bound_mu_row(q) == 0.0 && bound_geo(q) == 0.0, "closed-form bounds vacuous");
  out.require(est.exponent + 3.0 * est.std_error < 0.0, "exponent < 0 at 3 se");
  out.detail << "exponent=" << est.exponent << " se=" << est.std_error;
}

void birkhoff_suite(Outcome& out) {
  Rng rng(6);
  std::size_t contraction = 0, comparison = 0, scaling = 0;
  double worst_scale = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + t % 4);
    Matrix a(n, n);
    do {
      for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = uniform01(rng) < 0.15 ? 0.0 : 0.01 + 5.0 * uniform01(rng);
    } while (((a.rowwise().sum().array()) == 0.0).any());
    Vector p(n), q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = 1e-3 + uniform01(rng);
      q(i) = 1e-3 + uniform01(rng);
    }
    p /= p.sum();
    q /= q.sum();
    const double h = hilbert_metric(p, q).value();
    if (hilbert_metric(a * p, a * q).value() <= birkhoff_tau(a) * h + 1e-12) ++contraction;
    if (l1_distance(p, q) <= 2.0 / std::log(3.0) * h + 1e-12) ++comparison;
    const double c1 = std::ldexp(1.0, static_cast<int>(60 * uniform01(rng)) - 30);
    const double c2 = std::ldexp(1.0, static_cast<int>(60 * uniform01(rng)) - 30);
    if (hilbert_metric(c1 * p, c2 * q).value() == h) ++scaling;
    const double r1 = 1e-3 + 1e3 * uniform01(rng), r2 = 1e-3 + 1e3 * uniform01(rng);
    worst_scale = std::max(worst_scale, std::abs(hilbert_metric(r1 * p, r2 * q).value() - h));
  }
  out.require(contraction == 1000, "contraction inequality");
  out.require(comparison == 1000, "L1 comparison");
  out.require(scaling == 1000, "exact invariance under binary scalings");
  out.require(worst_scale <= 1e-14, "invariance under arbitrary scalings to rounding");
  out.detail << "contraction=" << contraction << " comparison=" << comparison
             << " exact_scaling=" << scaling << " max_scale_dev=" << worst_scale;
}

void zakai(Outcome& out) {
  Matrix off3(3, 3);
  off3 << 0, 1, 1,
          0.5, 0, 2,
          1, 0.3, 0;
  struct Case {
    GeneratorMatrix q;
    ObservationModel model;
  };
  const std::vector<Case> cases = {
      {from_rates(off3), ObservationModel::make(vec({0, 1, 2}), 1.0)},
      {pair_generator(1.0), ObservationModel::make(vec({0, 1}), 1.0)},
      {cyclic_generator(), ObservationModel::make(vec({1, 0, 1, 0}), 1.0)}};
  double worst = 0.0;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng = make_stream(7, c * 100 + s);
      const auto path = sample_path(cases[c].q, ProbabilityVector::uniform(cases[c].q.size()), 2.0, rng);
      const auto obs = synthesize_observations(path, cases[c].model, 1e-3, rng);
      const SplitStepScheme scheme(cases[c].q, cases[c].model, 1e-3);
      const auto whole = zakai_propagator(scheme, obs);
      const auto first = zakai_propagator(scheme, obs.window(0, 1000));
      const auto second = zakai_propagator(scheme, obs.window(1000, 1000));
      const auto product = second * first;
      const Matrix rel = (product.matrix * std::exp(product.log_scale - whole.log_scale)).array() /
                             whole.matrix.array() - 1.0;
      worst = std::max(worst, rel.cwiseAbs().maxCoeff());
      smallest = std::min({smallest, first.matrix.minCoeff(), second.matrix.minCoeff()});
    }
  }
  out.require(worst <= 1e-8, "factorization within relative 1e-8");
  out.require(smallest > 0.0, "unit-window propagators positive");
  out.detail << "max_rel_dev=" << worst << " min_entry=" << smallest;
}

void smoother(Outcome& out) {
  Matrix off(3, 3);
  off << 0, 1, 1,
         0.5, 0, 1,
         1, 0.3, 0;
  const auto q = from_rates(off);
  const auto model = ObservationModel::make(vec({0, 1, 2}), 1.0);
  const double geo = bound_geo(q);
  double sup_err = 0.0, col_dev = 0.0, worst_increase = -1.0, bound_excess = -1.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto nu = ProbabilityVector::from(vec({0.5, 0.3, 0.2}));
    Rng rng = make_stream(8, s);
    const auto path = sample_path(q, nu, 5.0, rng);
    const auto obs = synthesize_observations(path, model, 1e-3, rng);
    const auto run = run_smoother(nu, obs, q, model);
    const auto oracle = augmented_filter(nu, obs, q, model);
    for (std::size_t k = 0; k < run.rhos.size(); ++k) {
      const Matrix& rho = run.rhos[k].rho;
      sup_err = std::max(sup_err, (rho - oracle.initial_given_current(k)).cwiseAbs().maxCoeff());
      col_dev = std::max(col_dev, (rho.colwise().sum().array() - 1.0).abs().maxCoeff());
      const double spread = run.rhos[k].spread();
      if (k > 0) worst_increase = std::max(worst_increase, spread - run.rhos[k - 1].spread());
      const double t = static_cast<double>(k) * 1e-3;
      bound_excess = std::max(bound_excess, spread - std::exp(geo * t));
    }
    out.require(!run.floor_dominates, "floor not dominating");
  }
  out.require(sup_err <= 1e-3, "sup |rho - oracle| <= 1e-3");
  out.require(col_dev <= 1e-9, "columns sum to 1");
  out.require(worst_increase <= 1e-6, "spread nonincreasing");
  out.require(bound_excess <= 1e-3, "spread <= exp(bound_geo t) + 1e-3");
  out.detail << "sup_err=" << sup_err << " col_dev=" << col_dev << " max_increase=" << worst_increase
             << " bound_excess=" << bound_excess;
}

void time_average(Outcome& out) {
  Matrix off_a(3, 3), off_b(4, 4);
  off_a << 0, 1, 1,
           0.5, 0, 2,
           1, 0.3, 0;
  off_b << 0, 2, 0, 0,
           0, 0, 1, 0.5,
           0, 0, 0, 3,
           1, 0, 0, 0;
  const std::vector<std::pair<GeneratorMatrix, ObservationModel>> models = {
      {from_rates(off_a), ObservationModel::make(vec({0, 1, 2}), 1.0)},
      {from_rates(off_b), ObservationModel::make(vec({1, -1, 0.5, 2}), 0.8)}};
  double worst = 0.0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& [q, model] = models[m];
    const auto mu = invariant_measure(q);
    MonteCarloOptions opt{1e3, 1e-3, 20, 9 + m, 1};
    const auto avg = filter_time_average(q, model, ProbabilityVector::uniform(q.size()),
                                         ProbabilityVector::point_mass(q.size(), q.size() - 1), opt);
    const double dev = (avg.mean - mu.values()).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    out.detail << "model" << m + 1 << "_max_dev=" << dev << ' ';
  }
  out.require(worst <= 0.02, "time average within 0.02");
}

// Least-squares fit of d(r) = sum_{m=2}^{degree} c_m r^m on a fine grid near 0.
Vector taylor_fit(const GeneratorMatrix& q, const Vector& h, double step, int points, int degree) {
  Matrix basis(points, degree - 1);
  Vector values(points);
  for (int k = 0; k < points; ++k) {
    const double r = step * (k + 1);
    for (int m = 2; m <= degree; ++m) basis(k, m - 2) = std::pow(r, m);
    values(k) = d_moment(q, h, r, 1e-14);
  }
  // Column scaling keeps the normal equations well conditioned.
  Vector scale(degree - 1);
  for (int m = 0; m < degree - 1; ++m) {
    scale(m) = basis.col(m).norm();
    basis.col(m) /= scale(m);
  }
  Vector coef = basis.colPivHouseholderQr().solve(values);
  return coef.cwiseQuotient(scale);
}

void moments(Outcome& out) {
  Rng rng(10);
  double worst_second = 0.0, worst_higher = 0.0;
  std::size_t mc_checks = 0, mc_pass = 0;
  for (int g = 0; g < 5; ++g) {
    const std::size_t n = 2 + static_cast<std::size_t>(g % 3);
    const auto q = random_generator(n, rng, 0.2, 1.5);
    Vector h(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = 2.0 * uniform01(rng) - 1.0;
    const auto mu = invariant_measure(q);

    // d^{(q+2)}(0) = (q+2)! c_{q+2}.
    const Vector coef = taylor_fit(q, h, 0.02, 16, 11);
    double factorial = 2.0;
    for (std::size_t power = 0; power <= 3; ++power) {
      const double derivative = factorial * coef(static_cast<Eigen::Index>(power));
      const double expected = 2.0 * class_moment(q, h, power);
      if (power == 0) {
        const double e = 1e-3;
        double f[6];
        for (int k = 0; k < 6; ++k) f[k] = d_moment(q, h, k * e, 1e-14);
        // Forward difference for the second derivative with O(e^4) error.
        const double fd = (15.0 / 4 * f[0] - 77.0 / 6 * f[1] + 107.0 / 6 * f[2] - 13.0 * f[3] +
                           61.0 / 12 * f[4] - 5.0 / 6 * f[5]) / (e * e);
        worst_second = std::max({worst_second, std::abs(fd - expected), std::abs(derivative - expected)});
      } else {
        worst_higher = std::max(worst_higher, std::abs(derivative - expected));
      }
      factorial *= static_cast<double>(power + 3);
    }

    for (double r : {0.5, 1.0, 2.0}) {
      std::vector<double> samples;
      samples.reserve(10000);
      for (std::uint64_t s = 0; s < 10000; ++s) {
        Rng path_rng = make_stream(11 + static_cast<std::uint64_t>(g), s);
        const auto path = sample_path(q, mu, r, path_rng);
        const double integral = path.integrate(h, 0.0, r);
        samples.push_back(integral * integral);
      }
      const auto est = summarize(samples);
      ++mc_checks;
      if (std::abs(est.mean - d_moment(q, h, r)) <= 3.0 * est.std_error) ++mc_pass;
    }
  }
  out.require(worst_second <= 1e-6, "second derivative within 1e-6");
  out.require(worst_higher <= 1e-4, "higher derivatives within 1e-4");
  out.require(mc_pass == mc_checks, "Monte Carlo within 3 se");
  out.detail << "second_dev=" << worst_second << " higher_dev=" << worst_higher
             << " mc=" << mc_pass << "/" << mc_checks;
}

double accuracy(const GeneratorMatrix& q, const ObservationModel& model, double horizon,
                const std::vector<double>& r_grid, std::uint64_t seed) {
  const auto decomp = decompose_classes(q);
  const auto centroids = class_centroids(decomp, model, r_grid);
  const auto owner = decomp.class_of_states(q.size());
  int correct = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng = make_stream(seed, s);
    const auto path = sample_path(q, ProbabilityVector::uniform(q.size()), horizon, rng);
    const auto obs = synthesize_observations(path, model, 1e-2, rng);
    correct += classify_class(obs, centroids).class_index == owner[path.states.front()];
  }
  return correct / 100.0;
}

void identification(Outcome& out) {
  Matrix blocks(4, 4);
  blocks << 0, 1, 0, 0,
            1, 0, 0, 0,
            0, 0, 0, 1,
            0, 0, 1, 0;
  const auto mean_q = from_rates(blocks);
  const auto mean_model = ObservationModel::make(vec({0, 1, 1, 2}), 1.0);
  Matrix blocks2 = blocks;
  blocks2(2, 3) = blocks2(3, 2) = 10.0;
  const auto moment_q = from_rates(blocks2);
  const auto moment_model = ObservationModel::make(vec({-1.5, 1.5, -1.5, 1.5}), 1.0);
  const auto duplicate_model = ObservationModel::make(vec({0, 1, 0, 1}), 1.0);

  const double acc_mean = accuracy(mean_q, mean_model, 200.0, {1.0}, 12);
  const double acc_moment = accuracy(moment_q, moment_model, 500.0, {1.0}, 13);
  const bool flags_mean = check_identifiability(decompose_classes(mean_q), mean_model).satisfied();
  const bool flags_moment =
      check_identifiability(decompose_classes(moment_q), moment_model).satisfied();
  const bool flags_duplicate =
      check_identifiability(decompose_classes(mean_q), duplicate_model).satisfied();
  out.require(acc_mean >= 0.95, "mean-separated accuracy >= 95%");
  out.require(acc_moment >= 0.90, "equal-mean accuracy >= 90%");
  out.require(flags_mean && flags_moment, "identifiable models flagged satisfied");
  out.require(!flags_duplicate, "duplicated class flagged unsatisfied");
  out.detail << "acc_mean=" << acc_mean << " acc_moment=" << acc_moment;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& out) {
  const std::string pair = "generator = [[-1, 1], [1, -1]]\nh = [0, 1]\nnu = [1, 0]\n";
  const std::string blocks =
      "generator = [[-1, 1, 0, 0], [1, -1, 0, 0], [0, 0, -1, 1], [0, 0, 1, -1]]\n"
      "h = [0, 1, 1, 2]\n";
  const std::vector<std::string> configs = {
      "kind = stability\n" + pair + "T = 5\ntrials = 200\n",
      "kind = filter-run\n" + pair + "T = 5\n",
      "kind = bounds\n" + pair,
      "kind = identify\n" + blocks,
      "kind = classify\n" + blocks + "T = 50\ndt = 1e-2\ntrials = 20\nr_grid = [1]\n",
      "kind = counterexample\nnu = [0.7, 0.1, 0.1, 0.1]\nT = 20\ntrials = 50\n",
      "kind = smoother-check\n" + pair + "T = 2\n"};
  std::size_t files = 0;
  const fs::path root = fs::temp_directory_path() / "wonham_acceptance_determinism";
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto cfg = validate_config(configs[c]);
    std::vector<fs::path> dirs;
    for (unsigned threads : {1u, 1u, 2u}) {
      const fs::path dir = root / (std::to_string(c) + "_" + std::to_string(dirs.size()));
      fs::remove_all(dir);
      RunOptions options;
      options.seed = 20240601;
      options.out_dir = dir.string();
      options.threads = threads;
      const auto result = run(cfg, options);
      out.require(result.exit_code == kExitOk, "run " + std::to_string(c) + ": " + result.error_message);
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      const std::string reference = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k)
        out.require(reference == slurp(dirs[k] / entry.path().filename()),
                    entry.path().filename().string());
      ++files;
    }
  }
  fs::remove_all(root);
  out.detail << "csv_files=" << files << " runs_per_config=3";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Outcome&)> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "counterexample tables", 1.0, tables},
      {2, "counterexample instability", 60.0, instability},
      {3, "geometric bound", 300.0, geometric_bound},
      {4, "mu-row bound", 300.0, mu_row_bound},
      {5, "ergodic stability sign", 300.0, ergodic_sign},
      {6, "Birkhoff suite", 10.0, birkhoff_suite},
      {7, "Zakai factorization and positivity", 10.0, zakai},
      {8, "smoother oracle", 60.0, smoother},
      {9, "time-average ergodicity", 120.0, time_average},
      {10, "moment identities", 120.0, moments},
      {11, "identification", 300.0, identification},
      {12, "determinism", 60.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(outcome);
    } catch (const std::exception& e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.require(seconds < c.budget_seconds, "runtime budget");
    failures += outcome.pass ? 0 : 1;
    std::printf("criterion %2d %-36s %s  (%.2fs / %.0fs)  %s\n", c.id, c.name,
                outcome.pass ? "PASS" : "FAIL", seconds, c.budget_seconds,
                outcome.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
