#include "wonham/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "wonham/metrics.hpp"

namespace wonham {

using Index = Eigen::Index;

double bound_mu_row(const GeneratorMatrix& q) {
  const ProbabilityVector mu = invariant_measure(q);
  const std::size_t n = q.size();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      if (i != r) smallest = std::min(smallest, q(r, i));
    if (std::isfinite(smallest)) total += mu[r] * smallest;
  }
  return -total;
}

double bound_geo(const GeneratorMatrix& q) {
  const std::size_t n = q.size();
  if (n < 2) return 0.0;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t r = p + 1; r < n; ++r) smallest = std::min(smallest, q(p, r) * q(r, p));
  return smallest > 0.0 ? -2.0 * std::sqrt(smallest) : 0.0;
}

Prefactors prefactors(const ProbabilityVector& nu, const ProbabilityVector& beta) {
  if (nu.size() != beta.size()) {
    throw Error(ErrorKind::LengthMismatch, "prefactors: nu and beta sizes differ");
  }
  const std::size_t n = nu.size();
  const double dn = static_cast<double>(n);
  double sum_ratio = 0.0;
  double max_nu_beta = 0.0;
  double max_beta_nu = 0.0;
  bool equivalent = true;
  for (std::size_t j = 0; j < n; ++j) {
    if (nu[j] > 0.0 && beta[j] == 0.0) {
      std::ostringstream msg;
      msg << "nu is not absolutely continuous w.r.t. beta at state " << j;
      throw Error(ErrorKind::NotAbsolutelyContinuous, msg.str());
    }
    if (beta[j] > 0.0 && nu[j] == 0.0) equivalent = false;
    if (beta[j] > 0.0 && nu[j] > 0.0) {
      sum_ratio += nu[j] / beta[j];
      max_nu_beta = std::max(max_nu_beta, nu[j] / beta[j]);
      max_beta_nu = std::max(max_beta_nu, beta[j] / nu[j]);
    }
  }
  Prefactors out;
  out.a = dn * sum_ratio;
  out.b = equivalent ? dn * dn * max_nu_beta * max_beta_nu
                     : std::numeric_limits<double>::infinity();
  return out;
}

namespace {

// Least-squares slope of ys against xs.
double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

std::vector<std::size_t> report_indices(const std::vector<double>& times, double dt,
                                        std::size_t steps) {
  std::vector<std::size_t> out;
  for (double t : times) {
    const auto k = static_cast<std::size_t>(std::llround(t / dt));
    if (t < 0.0 || k > steps) {
      throw Error(ErrorKind::InvalidArgument, "report time outside the simulated horizon");
    }
    out.push_back(k);
  }
  return out;
}

LyapunovTrial lyapunov_trial(const GeneratorMatrix& q, const ObservationModel& model,
                             const SplitStepScheme& scheme, const ProbabilityVector& nu,
                             const ProbabilityVector& beta, const MonteCarloOptions& options,
                             const std::vector<std::size_t>& report_at, std::size_t index) {
  Rng rng = make_stream(options.seed, index);
  const ChainPath path = sample_path(q, nu, options.horizon, rng);
  const ObservationPath obs = synthesize_observations(path, model, options.dt, rng);
  const std::size_t steps = obs.count();

  LyapunovTrial trial;
  trial.distances.assign(report_at.size(), 0.0);
  std::vector<double> log_dist;
  log_dist.reserve(steps + 1);

  FilterPair pair(scheme, nu.values(), beta.values());
  std::size_t underflow = steps + 1;
  for (std::size_t k = 0;; ++k) {
    const double dist = pair.l1_distance();
    for (std::size_t r = 0; r < report_at.size(); ++r)
      if (report_at[r] == k) trial.distances[r] = dist;
    if (!(dist >= kDistanceFloor)) {
      underflow = k;
      break;
    }
    log_dist.push_back(std::log(dist));
    if (k == steps) break;
    pair.step(obs.increments[k]);
  }

  std::size_t end = steps + 1;
  if (underflow <= steps) {
    trial.truncated = true;
    end = underflow;
  }
  const std::size_t begin = end / 2;
  if (end < 2 || end - begin < 2) {
    trial.degenerate = true;
    return trial;
  }
  std::vector<double> xs, ys;
  for (std::size_t k = begin; k < end; ++k) {
    xs.push_back(static_cast<double>(k) * options.dt);
    ys.push_back(log_dist[k]);
  }
  trial.points = xs.size();
  trial.slope = regression_slope(xs, ys);
  return trial;
}

}  // namespace

LyapunovEstimate lyapunov_estimate(const GeneratorMatrix& q, const ObservationModel& model,
                                   const ProbabilityVector& nu, const ProbabilityVector& beta,
                                   const MonteCarloOptions& options,
                                   const std::vector<double>& report_times) {
  if (options.trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (nu.size() != q.size() || beta.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "initial laws and generator sizes differ");
  }
  const SplitStepScheme scheme(q, model, options.dt);
  const std::size_t steps = grid_steps(options.horizon, options.dt);
  const auto report_at = report_indices(report_times, options.dt, steps);

  LyapunovEstimate out;
  out.trials = options.trials;
  out.horizon = options.horizon;
  out.report_times = report_times;
  out.per_trial.resize(options.trials);
  parallel_for(options.trials, options.threads, [&](std::size_t i) {
    out.per_trial[i] = lyapunov_trial(q, model, scheme, nu, beta, options, report_at, i);
  });

  std::vector<double> slopes;
  for (const auto& t : out.per_trial) {
    if (t.degenerate) {
      ++out.degenerate_trials;
    } else {
      slopes.push_back(t.slope);
    }
  }
  if (slopes.empty()) {
    out.all_degenerate = true;
    out.exponent = -std::numeric_limits<double>::infinity();
  } else {
    const MeanEstimate s = summarize(slopes);
    out.exponent = s.mean;
    out.std_error = s.std_error;
  }
  for (std::size_t r = 0; r < report_at.size(); ++r) {
    std::vector<double> values;
    for (const auto& t : out.per_trial) values.push_back(t.distances[r]);
    out.mean_distance.push_back(summarize(values));
  }
  return out;
}

MeanEstimate contraction_rate(const GeneratorMatrix& q, const ObservationModel& model,
                              const ProbabilityVector& nu, double dt, std::size_t blocks,
                              std::uint64_t seed) {
  if (!is_irreducible(q)) {
    throw Error(ErrorKind::NotIrreducible, "contraction_rate requires an irreducible generator");
  }
  if (blocks == 0) throw Error(ErrorKind::InvalidArgument, "contraction_rate needs blocks >= 1");
  const std::size_t per_block = grid_steps(1.0, dt);
  Rng rng = make_stream(seed, 0);
  const ChainPath path = sample_path(q, nu, static_cast<double>(blocks), rng);
  const ObservationPath obs = synthesize_observations(path, model, dt, rng);
  const SplitStepScheme scheme(q, model, dt);

  std::vector<double> values;
  values.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const ZakaiPropagator j = zakai_propagator(scheme, obs.window(b * per_block, per_block));
    const double tau = birkhoff_tau(j.matrix);
    values.push_back(tau > 0.0 ? std::max(-1.0, std::log(tau)) : -1.0);
  }
  return summarize(values);
}

TimeAverage filter_time_average(const GeneratorMatrix& q, const ObservationModel& model,
                                const ProbabilityVector& nu, const ProbabilityVector& beta,
                                const MonteCarloOptions& options) {
  if (options.trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  const SplitStepScheme scheme(q, model, options.dt);
  const auto n = static_cast<Index>(q.size());
  TimeAverage out;
  out.per_trial.assign(options.trials, Vector::Zero(n));
  parallel_for(options.trials, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(options.seed, i);
    const ChainPath path = sample_path(q, nu, options.horizon, rng);
    const ObservationPath obs = synthesize_observations(path, model, options.dt, rng);
    Vector pi = beta.values();
    Vector acc = Vector::Zero(n);
    // Trapezoidal rule on the grid.
    for (double dy : obs.increments) {
      Vector next = wonham_step(scheme, pi, dy).pi;
      acc += 0.5 * (pi + next);
      pi = std::move(next);
    }
    out.per_trial[i] = acc / static_cast<double>(obs.count());
  });
  out.mean = Vector::Zero(n);
  for (const auto& v : out.per_trial) out.mean += v;
  out.mean /= static_cast<double>(options.trials);
  return out;
}

double class_moment(const GeneratorMatrix& qj, const Vector& hj, std::size_t power) {
  if (hj.size() != static_cast<Index>(qj.size())) {
    throw Error(ErrorKind::LengthMismatch, "class_moment: h and generator sizes differ");
  }
  const ProbabilityVector mu = invariant_measure(qj);
  Vector v = hj;
  for (std::size_t p = 0; p < power; ++p) v = qj.rates() * v;
  return hj.dot(mu.values().cwiseProduct(v));
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb,
               double m, double fm, double whole, double eps, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
         simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

}  // namespace

double d_moment(const GeneratorMatrix& qj, const Vector& hj, double r, double rel_tol) {
  if (!(r >= 0.0)) throw Error(ErrorKind::InvalidArgument, "d_moment requires r >= 0");
  if (hj.size() != static_cast<Index>(qj.size())) {
    throw Error(ErrorKind::LengthMismatch, "d_moment: h and generator sizes differ");
  }
  const ProbabilityVector mu = invariant_measure(qj);
  if (r == 0.0) return 0.0;
  const Vector weighted = mu.values().cwiseProduct(hj);
  const Matrix& rates = qj.rates();
  const std::function<double(double)> integrand = [&](double v) {
    return 2.0 * (r - v) * weighted.dot(expm(rates * v) * hj);
  };
  // Split [0, r] into panels so each initial Simpson estimate already
  // resolves the exponential decay scale.
  const double scale = std::max(1.0, rates.cwiseAbs().rowwise().sum().maxCoeff() * r);
  const auto panels = static_cast<int>(std::min(64.0, std::ceil(scale)));
  const double width = r / panels;

  std::vector<double> coarse(panels);
  double coarse_total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * width;
    const double b = (p + 1) * width;
    const double m = 0.5 * (a + b);
    coarse[p] = width / 6.0 * (integrand(a) + 4.0 * integrand(m) + integrand(b));
    coarse_total += std::abs(coarse[p]);
  }
  const double eps = rel_tol * std::max(coarse_total, std::numeric_limits<double>::min());
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * width;
    const double b = (p + 1) * width;
    const double m = 0.5 * (a + b);
    total += simpson(integrand, a, integrand(a), b, integrand(b), m, integrand(m), coarse[p],
                     eps / panels, 40);
  }
  return total;
}

bool IdentifiabilityReport::satisfied() const {
  return std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.satisfied; });
}

Vector class_observation(const ClassDecomposition& decomp, const ObservationModel& model,
                         std::size_t index) {
  const auto& members = decomp.classes.at(index);
  Vector hj(static_cast<Index>(members.size()));
  for (std::size_t s = 0; s < members.size(); ++s) {
    if (members[s] >= model.size()) {
      throw Error(ErrorKind::LengthMismatch, "h is shorter than the state space");
    }
    hj(static_cast<Index>(s)) = model.h(static_cast<Index>(members[s]));
  }
  return hj;
}

namespace {

void require_irreducible_classes(const ClassDecomposition& decomp) {
  for (std::size_t c = 0; c < decomp.class_count(); ++c)
    if (!decomp.irreducible[c]) {
      std::ostringstream msg;
      msg << "class " << c << " is not irreducible";
      throw Error(ErrorKind::ClassNotIrreducible, msg.str());
    }
}

}  // namespace

IdentifiabilityReport check_identifiability(const ClassDecomposition& decomp,
                                            const ObservationModel& model, double tol) {
  require_irreducible_classes(decomp);
  const std::size_t m = decomp.class_count();
  std::vector<Vector> hs;
  std::vector<double> means;
  for (std::size_t c = 0; c < m; ++c) {
    hs.push_back(class_observation(decomp, model, c));
    means.push_back(hs[c].dot(invariant_measure(decomp.sub_generators[c]).values()));
  }
  IdentifiabilityReport report;
  report.tolerance = tol;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      if (j == k) continue;
      PairSeparation pair;
      pair.j = j;
      pair.k = k;
      pair.mean_sep = std::abs(means[j] - means[k]);
      const std::size_t top = decomp.classes[j].size() + decomp.classes[k].size();
      for (std::size_t power = 0; power < top; ++power) {
        pair.moment_seps.push_back(
            std::abs(class_moment(decomp.sub_generators[j], hs[j], power) -
                     class_moment(decomp.sub_generators[k], hs[k], power)));
      }
      pair.satisfied = pair.mean_sep > tol ||
                       std::any_of(pair.moment_seps.begin(), pair.moment_seps.end(),
                                   [tol](double s) { return s > tol; });
      report.pairs.push_back(std::move(pair));
    }
  return report;
}

ClassCentroids class_centroids(const ClassDecomposition& decomp, const ObservationModel& model,
                               const std::vector<double>& r_grid) {
  require_irreducible_classes(decomp);
  for (double r : r_grid)
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "r_grid entries must be positive");
  ClassCentroids out;
  out.r_grid = r_grid;
  out.sigma = model.sigma;
  for (std::size_t c = 0; c < decomp.class_count(); ++c) {
    const Vector hj = class_observation(decomp, model, c);
    const GeneratorMatrix& qj = decomp.sub_generators[c];
    Vector centroid(static_cast<Index>(r_grid.size() + 1));
    centroid(0) = hj.dot(invariant_measure(qj).values());
    for (std::size_t i = 0; i < r_grid.size(); ++i)
      centroid(static_cast<Index>(i + 1)) = d_moment(qj, hj, r_grid[i]);
    out.centroids.push_back(std::move(centroid));
  }
  return out;
}

Classification classify_class(const ObservationPath& obs, const ClassCentroids& centroids,
                              std::size_t min_blocks) {
  const std::size_t steps = obs.count();
  if (steps == 0) throw Error(ErrorKind::HorizonTooShort, "empty observation record");
  Classification out;
  out.statistics.resize(static_cast<Index>(centroids.r_grid.size() + 1));
  double total = 0.0;
  for (double dy : obs.increments) total += dy;
  out.statistics(0) = total / obs.horizon();

  for (std::size_t i = 0; i < centroids.r_grid.size(); ++i) {
    const double r = centroids.r_grid[i];
    const std::size_t block = grid_steps(r, obs.dt);
    const std::size_t blocks = block == 0 ? 0 : steps / block;
    if (block == 0 || blocks < min_blocks) {
      std::ostringstream msg;
      msg << "horizon " << obs.horizon() << " holds " << blocks << " blocks of length " << r
          << "; at least " << min_blocks << " required";
      throw Error(ErrorKind::HorizonTooShort, msg.str());
    }
    double z = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      double sum = 0.0;
      for (std::size_t k = b * block; k < (b + 1) * block; ++k) sum += obs.increments[k];
      z += sum * sum;
    }
    out.statistics(static_cast<Index>(i + 1)) =
        z / static_cast<double>(blocks) - r * centroids.sigma * centroids.sigma;
  }

  out.distances.resize(static_cast<Index>(centroids.centroids.size()));
  for (std::size_t c = 0; c < centroids.centroids.size(); ++c)
    out.distances(static_cast<Index>(c)) = (out.statistics - centroids.centroids[c]).norm();
  Index best = 0;
  out.distances.minCoeff(&best);
  out.class_index = static_cast<std::size_t>(best);
  return out;
}

Classification classify_class(const ObservationPath& obs, const ClassDecomposition& decomp,
                              const ObservationModel& model, const std::vector<double>& r_grid,
                              std::size_t min_blocks) {
  return classify_class(obs, class_centroids(decomp, model, r_grid), min_blocks);
}

}  // namespace wonham
