#include "wonham/markov.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace wonham {

namespace {

using Index = Eigen::Index;

// reach[i][j]: j can be reached from i along positive rates (i reaches i).
std::vector<std::vector<bool>> reachability(const Matrix& rates) {
  const auto n = static_cast<std::size_t>(rates.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> queue{s};
    reach[s][s] = true;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && rates(static_cast<Index>(i), static_cast<Index>(j)) > 0.0 && !reach[s][j]) {
          reach[s][j] = true;
          queue.push_back(j);
        }
      }
    }
  }
  return reach;
}

}  // namespace

GeneratorMatrix GeneratorMatrix::validate(const Matrix& raw, std::vector<std::string> labels) {
  if (raw.rows() != raw.cols() || raw.rows() == 0) {
    throw Error(ErrorKind::NotSquare, "generator must be a non-empty square matrix");
  }
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(raw.rows())) {
    throw Error(ErrorKind::LengthMismatch, "generator labels must match the state count");
  }
  Matrix rates = raw;
  for (Index i = 0; i < rates.rows(); ++i) {
    double off = 0.0;
    for (Index j = 0; j < rates.cols(); ++j) {
      if (!std::isfinite(rates(i, j))) {
        throw Error(ErrorKind::InvalidArgument, "generator entries must be finite");
      }
      if (i == j) continue;
      if (rates(i, j) < 0.0) {
        std::ostringstream msg;
        msg << "negative off-diagonal rate at (" << i << ", " << j << ")";
        throw Error(ErrorKind::NegativeOffDiagonal, msg.str());
      }
      off += rates(i, j);
    }
    const double row_sum = off + rates(i, i);
    if (std::abs(row_sum) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "row " << i << " sums to " << row_sum;
      throw Error(ErrorKind::RowSumNonZero, msg.str());
    }
    rates(i, i) = -off;
  }
  return GeneratorMatrix(std::move(rates), std::move(labels));
}

GeneratorMatrix GeneratorMatrix::restrict_to(const std::vector<std::size_t>& states) const {
  const auto m = static_cast<Index>(states.size());
  Matrix sub(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b)
      sub(a, b) = rates_(static_cast<Index>(states[a]), static_cast<Index>(states[b]));
  std::vector<std::string> sub_labels;
  if (!labels_.empty())
    for (auto s : states) sub_labels.push_back(labels_[s]);
  return validate(sub, std::move(sub_labels));
}

ProbabilityVector ProbabilityVector::from(const Vector& raw) {
  if (raw.size() == 0) throw Error(ErrorKind::InvalidProbability, "empty probability vector");
  double sum = 0.0;
  for (Index i = 0; i < raw.size(); ++i) {
    if (!(raw(i) >= 0.0) || !std::isfinite(raw(i))) {
      throw Error(ErrorKind::InvalidProbability, "probability entries must be finite and >= 0");
    }
    sum += raw(i);
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "probability vector sums to " << sum;
    throw Error(ErrorKind::InvalidProbability, msg.str());
  }
  return ProbabilityVector(raw / sum);
}

ProbabilityVector ProbabilityVector::uniform(std::size_t n) {
  return ProbabilityVector(Vector::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n)));
}

ProbabilityVector ProbabilityVector::point_mass(std::size_t n, std::size_t state) {
  Vector p = Vector::Zero(static_cast<Index>(n));
  p(static_cast<Index>(state)) = 1.0;
  return ProbabilityVector(std::move(p));
}

std::vector<std::size_t> ClassDecomposition::class_of_states(std::size_t n) const {
  std::vector<std::size_t> owner(n, 0);
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (auto s : classes[c]) owner[s] = c;
  return owner;
}

ClassDecomposition ClassDecomposition::from_labels(const GeneratorMatrix& q,
                                                   const std::vector<std::size_t>& labels) {
  const std::size_t n = q.size();
  if (labels.size() != n) {
    throw Error(ErrorKind::LengthMismatch, "class labels must match the state count");
  }
  std::vector<std::size_t> distinct(labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  ClassDecomposition out;
  for (auto label : distinct) {
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < n; ++s)
      if (labels[s] == label) members.push_back(s);
    out.classes.push_back(std::move(members));
  }
  std::sort(out.classes.begin(), out.classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && labels[i] != labels[j] && q(i, j) > 0.0) {
        std::ostringstream msg;
        msg << "positive rate from state " << i << " to state " << j
            << " crosses class boundaries";
        throw Error(ErrorKind::NotBlockDecomposable, msg.str());
      }

  for (const auto& members : out.classes) {
    GeneratorMatrix sub = q.restrict_to(members);
    out.irreducible.push_back(is_irreducible(sub));
    out.sub_generators.push_back(std::move(sub));
  }
  return out;
}

ClassDecomposition decompose_classes(const GeneratorMatrix& q) {
  const std::size_t n = q.size();
  const auto reach = reachability(q.rates());
  std::vector<std::size_t> labels(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != n) continue;
    for (std::size_t j = i; j < n; ++j)
      if (reach[i][j] && reach[j][i]) labels[j] = next;
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j] && !reach[j][i]) {
        std::ostringstream msg;
        msg << "state " << i << " leads to state " << j
            << " without return; transient states are not supported";
        throw Error(ErrorKind::NotBlockDecomposable, msg.str());
      }
    }
    ++next;
  }
  return ClassDecomposition::from_labels(q, labels);
}

bool is_irreducible(const GeneratorMatrix& q) {
  const auto reach = reachability(q.rates());
  for (const auto& row : reach)
    for (bool r : row)
      if (!r) return false;
  return true;
}

ProbabilityVector invariant_measure(const GeneratorMatrix& q) {
  if (!is_irreducible(q)) {
    throw Error(ErrorKind::NotIrreducible, "invariant measure requires an irreducible generator");
  }
  const auto n = static_cast<Index>(q.size());
  // Solve Q^T mu = 0 with the last equation replaced by sum(mu) = 1.
  Matrix system = q.rates().transpose();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector mu = system.fullPivLu().solve(rhs);
  for (Index i = 0; i < n; ++i) mu(i) = std::max(mu(i), 0.0);
  return ProbabilityVector::from(mu / mu.sum());
}

Matrix expm(const Matrix& a) {
  const Index n = a.rows();
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);
  const double theta = norm / std::ldexp(1.0, squarings);

  // Smallest degree whose Taylor remainder bound theta^(m+1)/(m+1)! * e^theta
  // is below 1e-13 (relative to ||exp|| >= e^-theta).
  int degree = 1;
  double term = theta;
  while (term * theta / (degree + 1) * std::exp(2.0 * theta) > 1e-13 && degree < 30) {
    ++degree;
    term *= theta / degree;
  }

  Matrix result = Matrix::Identity(n, n);
  for (int k = degree; k >= 1; --k) {
    result = Matrix::Identity(n, n) + (scaled * result) / static_cast<double>(k);
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

Matrix transition_matrix(const GeneratorMatrix& q, double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorKind::InvalidArgument, "transition_matrix requires dt >= 0");
  }
  // Round-off can leave entries a few ulps below zero; they are clamped.
  return expm(q.rates() * dt).cwiseMax(0.0);
}

std::size_t ChainPath::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

double ChainPath::integrate(const Vector& f, double a, double b) const {
  if (b <= a) return 0.0;
  auto k = static_cast<std::size_t>(std::upper_bound(jump_times.begin(), jump_times.end(), a) -
                                    jump_times.begin());
  double total = 0.0;
  double left = a;
  while (left < b) {
    const double right = k < jump_times.size() ? std::min(jump_times[k], b) : b;
    total += f(static_cast<Index>(states[k])) * (right - left);
    left = right;
    ++k;
  }
  return total;
}

std::size_t sample_index(const Vector& p, Rng& rng) {
  const double u = uniform01(rng) * p.sum();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    last_positive = static_cast<std::size_t>(i);
    acc += p(i);
    if (u < acc) return static_cast<std::size_t>(i);
  }
  return last_positive;
}

ChainPath sample_path(const GeneratorMatrix& q, const ProbabilityVector& initial, double horizon,
                      Rng& rng) {
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (initial.size() != q.size()) {
    throw Error(ErrorKind::LengthMismatch, "initial law and generator sizes differ");
  }
  ChainPath path;
  path.horizon = horizon;
  std::size_t state = sample_index(initial.values(), rng);
  path.states.push_back(state);
  double t = 0.0;
  const Index n = static_cast<Index>(q.size());
  for (;;) {
    const double exit = q.exit_rate(state);
    if (exit <= 0.0) break;
    t += exponential(rng, exit);
    if (t > horizon) break;
    // Jump target j != state with probability lambda_ij / exit.
    const double u = uniform01(rng) * exit;
    double acc = 0.0;
    std::size_t next = state;
    for (Index j = 0; j < n; ++j) {
      if (static_cast<std::size_t>(j) == state) continue;
      const double rate = q.rates()(static_cast<Index>(state), j);
      if (rate <= 0.0) continue;
      next = static_cast<std::size_t>(j);
      acc += rate;
      if (u < acc) break;
    }
    path.jump_times.push_back(t);
    path.states.push_back(next);
    state = next;
  }
  return path;
}

}  // namespace wonham
