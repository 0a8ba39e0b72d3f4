#include "wonham/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "wonham/csv.hpp"

namespace wonham {

using Index = Eigen::Index;

SplitStepScheme::SplitStepScheme(const GeneratorMatrix& q, const ObservationModel& model,
                                 double dt)
    : transition_(transition_matrix(q, dt)), model_(model), dt_(dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "filter step dt must be positive");
  if (model.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "h and generator sizes differ");
  }
  const double inv_var = 1.0 / (model.sigma * model.sigma);
  gain_ = model.h * inv_var;
  drift_ = model.h.cwiseProduct(model.h) * (0.5 * dt * inv_var);
}

double SplitStepScheme::likelihood(double dy, Vector& weights) const {
  weights = gain_ * dy - drift_;
  const double top = weights.maxCoeff();
  weights = (weights.array() - top).exp().matrix();
  return top;
}

FilterStep wonham_step(const SplitStepScheme& scheme, const Vector& pi, double dy) {
  FilterStep out;
  Vector weights;
  const double top = scheme.likelihood(dy, weights);
  out.pi = weights.cwiseProduct(scheme.predict(pi));
  const double mass = out.pi.sum();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorKind::DegenerateMass,
                "filter mass underflowed; refine the grid (dt h^2 / sigma^2 too large)");
  }
  out.pi /= mass;
  out.log_mass_increment = top + std::log(mass);
  return out;
}

FilterStep wonham_step(const ProbabilityVector& pi, double dy, double dt, const GeneratorMatrix& q,
                       const ObservationModel& model) {
  return wonham_step(SplitStepScheme(q, model, dt), pi.values(), dy);
}

FilterTrajectory run_filter(const SplitStepScheme& scheme, const Vector& init,
                            const ObservationPath& obs) {
  FilterTrajectory traj;
  traj.dt = obs.dt;
  traj.pis.reserve(obs.count() + 1);
  traj.log_mass.reserve(obs.count() + 1);
  traj.pis.push_back(init);
  traj.log_mass.push_back(0.0);
  for (double dy : obs.increments) {
    FilterStep next = wonham_step(scheme, traj.pis.back(), dy);
    traj.log_mass.push_back(traj.log_mass.back() + next.log_mass_increment);
    traj.pis.push_back(std::move(next.pi));
  }
  return traj;
}

FilterTrajectory run_filter(const ProbabilityVector& init, const ObservationPath& obs,
                            const GeneratorMatrix& q, const ObservationModel& model) {
  if (init.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "initial law and generator sizes differ");
  }
  if (obs.count() == 0) {
    FilterTrajectory traj;
    traj.dt = obs.dt;
    traj.pis.push_back(init.values());
    traj.log_mass.push_back(0.0);
    return traj;
  }
  return run_filter(SplitStepScheme(q, model, obs.dt), init.values(), obs);
}

void write_csv(std::ostream& out, const FilterTrajectory& traj) {
  out << 't';
  const Index n = traj.pis.empty() ? 0 : traj.pis.front().size();
  for (Index i = 0; i < n; ++i) out << ",pi_" << (i + 1);
  out << ",log_mass\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << csv_number(traj.time(k));
    for (Index i = 0; i < n; ++i) out << ',' << csv_number(traj.pis[k](i));
    out << ',' << csv_number(traj.log_mass[k]) << '\n';
  }
}

FilterPair::FilterPair(const SplitStepScheme& scheme, const Vector& reference_init,
                       const Vector& other_init)
    : scheme_(&scheme), reference_(reference_init), difference_(other_init - reference_init) {}

void FilterPair::step(double dy) {
  scheme_->likelihood(dy, weights_);
  const Vector predicted = scheme_->predict(reference_);
  const Vector predicted_diff = scheme_->predict(difference_);
  const double mass = weights_.dot(predicted);
  const double diff_mass = weights_.dot(predicted_diff);
  if (!(mass > 0.0) || !(mass + diff_mass > 0.0)) {
    throw Error(ErrorKind::DegenerateMass, "filter mass underflowed in paired run");
  }
  reference_ = weights_.cwiseProduct(predicted) / mass;
  // other_new - ref_new = (L.d - <L,d> ref_new) / (<L,p> + <L,d>)
  difference_ = (weights_.cwiseProduct(predicted_diff) - diff_mass * reference_) /
                (mass + diff_mass);
}

ZakaiPropagator operator*(const ZakaiPropagator& later, const ZakaiPropagator& earlier) {
  ZakaiPropagator out{later.matrix * earlier.matrix, later.log_scale + earlier.log_scale};
  const double top = out.matrix.maxCoeff();
  if (top > 0.0) {
    out.matrix /= top;
    out.log_scale += std::log(top);
  }
  return out;
}

ZakaiPropagator zakai_propagator(const SplitStepScheme& scheme, const ObservationPath& window) {
  if (window.count() == 0) throw Error(ErrorKind::InvalidArgument, "empty propagator window");
  const auto n = static_cast<Index>(scheme.size());
  ZakaiPropagator out{Matrix::Identity(n, n), 0.0};
  const Matrix predict = scheme.transition().transpose();
  Vector weights;
  for (double dy : window.increments) {
    out.log_scale += scheme.likelihood(dy, weights);
    out.matrix = weights.asDiagonal() * (predict * out.matrix);
    const double top = out.matrix.maxCoeff();
    if (!(top > 0.0) || !std::isfinite(top)) {
      throw Error(ErrorKind::DegenerateMass, "propagator underflowed");
    }
    out.matrix /= top;
    out.log_scale += std::log(top);
  }
  return out;
}

ZakaiPropagator zakai_propagator(const ObservationPath& window, const GeneratorMatrix& q,
                                 const ObservationModel& model) {
  return zakai_propagator(SplitStepScheme(q, model, window.dt), window);
}

SmootherMatrix SmootherMatrix::identity(std::size_t n) {
  const auto m = static_cast<Index>(n);
  return SmootherMatrix{Matrix::Identity(m, m)};
}

double SmootherMatrix::spread() const {
  double out = 0.0;
  for (Index j = 0; j < rho.rows(); ++j)
    out = std::max(out, rho.row(j).maxCoeff() - rho.row(j).minCoeff());
  return out;
}

std::size_t SmootherMatrix::argmax_column(std::size_t j) const {
  Index best = 0;
  rho.row(static_cast<Index>(j)).maxCoeff(&best);  // first occurrence
  return static_cast<std::size_t>(best);
}

std::size_t SmootherMatrix::argmin_column(std::size_t j) const {
  Index best = 0;
  rho.row(static_cast<Index>(j)).minCoeff(&best);
  return static_cast<std::size_t>(best);
}

SmootherStep smoother_step(const SmootherMatrix& rho, const Vector& pi, const GeneratorMatrix& q,
                           double dt, double floor) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "smoother step dt must be positive");
  const auto n = static_cast<Index>(q.size());
  if (rho.rho.rows() != n || pi.size() != n) {
    throw Error(ErrorKind::LengthMismatch, "smoother, filter and generator sizes differ");
  }
  SmootherStep out{rho, false};
  for (Index i = 0; i < n; ++i) {
    double denom = pi(i);
    if (denom < floor) {
      denom = floor;
      out.used_floor = true;
    }
    // Column i relaxes toward the rate-weighted average of the other columns
    // at total rate a. The relaxation factor 1 - exp(-a dt) equals the Euler
    // factor a dt to first order and keeps the update a convex combination of
    // the old columns for any a dt.
    Vector target = Vector::Zero(n);
    double total = 0.0;
    for (Index r = 0; r < n; ++r) {
      if (r == i) continue;
      const double c = q.rates()(r, i) * std::max(pi(r), 0.0) / denom;
      if (c <= 0.0) continue;
      target += c * rho.rho.col(r);
      total += c;
    }
    if (total <= 0.0) continue;
    const double factor = -std::expm1(-total * dt);
    out.rho.rho.col(i) += factor * (target / total - rho.rho.col(i));
  }
  for (Index i = 0; i < n; ++i) {
    const double sum = out.rho.rho.col(i).sum();
    out.rho.rho.col(i) /= sum;
  }
  return out;
}

SmootherRun run_smoother(const ProbabilityVector& init, const ObservationPath& obs,
                         const GeneratorMatrix& q, const ObservationModel& model,
                         const SmootherOptions& options) {
  SmootherRun run;
  run.filter = run_filter(init, obs, q, model);
  run.rhos.reserve(run.filter.size());
  run.rhos.push_back(SmootherMatrix::identity(q.size()));
  for (std::size_t k = 0; k + 1 < run.filter.size(); ++k) {
    SmootherStep step = smoother_step(run.rhos.back(), run.filter.pis[k], q, obs.dt, options.floor);
    if (step.used_floor) ++run.floor_steps;
    run.rhos.push_back(std::move(step.rho));
  }
  const std::size_t steps = run.rhos.size() - 1;
  run.floor_dominates =
      steps > 0 &&
      static_cast<double>(run.floor_steps) > options.max_floor_fraction * static_cast<double>(steps);
  return run;
}

Vector AugmentedTrajectory::marginal(std::size_t k) const {
  return joints[k].colwise().sum().transpose();
}

Matrix AugmentedTrajectory::initial_given_current(std::size_t k) const {
  Matrix out = joints[k];
  for (Index i = 0; i < out.cols(); ++i) {
    const double mass = out.col(i).sum();
    if (mass > 0.0) out.col(i) /= mass;
  }
  return out;
}

Vector AugmentedTrajectory::initial_marginal(std::size_t k) const {
  return joints[k].rowwise().sum();
}

AugmentedTrajectory augmented_filter(const ProbabilityVector& init, const ObservationPath& obs,
                                     const GeneratorMatrix& q, const ObservationModel& model) {
  if (q.size() > kMaxAugmentedStates) {
    throw Error(ErrorKind::TooLarge, "augmented filter is limited to 50 states");
  }
  if (init.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "initial law and generator sizes differ");
  }
  AugmentedTrajectory out;
  out.dt = obs.dt;
  out.joints.reserve(obs.count() + 1);
  out.joints.emplace_back(init.values().asDiagonal());
  if (obs.count() == 0) return out;

  // The pair chain's semigroup is I (x) exp(Q dt): each row j (fixed X_0)
  // evolves as a row vector under exp(Q dt); the likelihood depends on X_t only.
  const SplitStepScheme scheme(q, model, obs.dt);
  Vector weights;
  for (double dy : obs.increments) {
    scheme.likelihood(dy, weights);
    Matrix next = out.joints.back() * scheme.transition();
    next = next * weights.asDiagonal();
    const double mass = next.sum();
    if (!(mass > 0.0)) throw Error(ErrorKind::DegenerateMass, "augmented filter mass underflowed");
    out.joints.push_back(next / mass);
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<SmootherMatrix>& rhos, double dt,
               std::size_t every) {
  out << "t,j,i,rho\n";
  if (every == 0) every = 1;
  for (std::size_t k = 0; k < rhos.size(); k += every) {
    const Matrix& rho = rhos[k].rho;
    for (Index j = 0; j < rho.rows(); ++j)
      for (Index i = 0; i < rho.cols(); ++i)
        out << csv_number(static_cast<double>(k) * dt) << ',' << (j + 1) << ',' << (i + 1) << ','
            << csv_number(rho(j, i)) << '\n';
  }
}

}  // namespace wonham
