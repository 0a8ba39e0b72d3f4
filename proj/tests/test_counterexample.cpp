#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <tuple>
#include <sstream>

#include "models.hpp"
#include "wonham/counterexample.hpp"
#include "wonham/error.hpp"
#include "wonham/filtering.hpp"
#include "wonham/stability.hpp"

using namespace wonham;
using wonham::test::vec;

namespace {

ProbabilityVector skewed() { return ProbabilityVector::from(vec({0.7, 0.1, 0.1, 0.1})); }

JumpObservation unit_jumps(int y0, std::size_t count) {
  JumpObservation obs;
  obs.initial_value = y0;
  for (std::size_t k = 1; k <= count; ++k) obs.jump_times.push_back(static_cast<double>(k));
  obs.horizon = static_cast<double>(count + 1);
  return obs;
}

}  // namespace

TEST(Cyclic, ModelShape) {
  const auto m = build_cyclic_model();
  EXPECT_EQ(m.generator(0, 1), 1.0);
  EXPECT_EQ(m.generator(3, 0), 1.0);
  EXPECT_EQ(m.generator(1, 0), 0.0);
  EXPECT_EQ(m.indicator_states, (std::vector<std::size_t>{0, 2}));
}

TEST(Cyclic, TablesForSkewedPrior) {
  const auto nu = skewed();
  // Y_0 = 1: pi(1) cycles 7/8, 0, 1/8, 0 and pi(2) follows one interval behind.
  const double one[4][2] = {{0.875, 0}, {0, 0.875}, {0.125, 0}, {0, 0.125}};
  const auto t1 = reproduce_table(nu, 1, 12);
  for (std::size_t k = 0; k < t1.size(); ++k) {
    EXPECT_NEAR(t1[k].pi1, one[k % 4][0], 1e-14);
    EXPECT_NEAR(t1[k].pi2, one[k % 4][1], 1e-14);
    EXPECT_EQ(t1[k].y, k % 2 == 0 ? 1 : 0);
    EXPECT_TRUE(t1[k].match);
  }
  const double zero[4][2] = {{0, 0.5}, {0.5, 0}, {0, 0.5}, {0.5, 0}};
  const auto t0 = reproduce_table(nu, 0, 12);
  for (std::size_t k = 0; k < t0.size(); ++k) {
    EXPECT_NEAR(t0[k].pi1, zero[k % 4][0], 1e-14);
    EXPECT_NEAR(t0[k].pi2, zero[k % 4][1], 1e-14);
    EXPECT_TRUE(t0[k].match);
  }
  std::ostringstream out;
  write_tables_csv(out, t1, t0);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "table,interval,Y,pi1,pi2,expected_pi1,expected_pi2,match");
}

TEST(Cyclic, TabulatedStateHasPeriodFour) {
  const auto nu = ProbabilityVector::from(vec({0.4, 0.3, 0.2, 0.1}));
  for (int y0 : {0, 1})
    for (std::size_t k = 0; k < 8; ++k) {
      const auto a = tabulated_state(nu, y0, k), b = tabulated_state(nu, y0, k + 4);
      EXPECT_EQ(a.pi1, b.pi1);
      EXPECT_EQ(a.pi2, b.pi2);
      EXPECT_NEAR(a.full().sum(), 1.0, 1e-15);
    }
}

TEST(Cyclic, FullStateAndLookup) {
  const auto traj = exact_jump_filter(skewed(), unit_jumps(1, 3));
  ASSERT_EQ(traj.size(), 4u);
  const auto s = state_at(traj, 2.5);
  EXPECT_EQ(s.y, 1);
  EXPECT_NEAR(s.pi3(), 0.875, 1e-15);
  EXPECT_EQ(state_at(traj, 1.0).y, 0);
}

TEST(Cyclic, ZeroWeightBranchIsDegenerate) {
  const auto nu = ProbabilityVector::from(vec({0.0, 0.5, 0.0, 0.5}));
  try {
    exact_jump_filter(nu, unit_jumps(1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInit);
  }
}

TEST(Cyclic, InvariantSupport) {
  const auto support = invariant_support(skewed());
  double mass = 0.0;
  for (const auto& p : support) mass += p.mass;
  EXPECT_NEAR(mass, 1.0, 1e-15);
  EXPECT_NEAR(support[0].pi1, 0.875, 1e-15);
  EXPECT_NEAR(support[0].mass, 0.2, 1e-15);
  EXPECT_NEAR(support[4].mass, 0.05, 1e-15);
}

TEST(Cyclic, LongRunOccupationMatchesSupport) {
  const auto nu = skewed();
  const auto m = build_cyclic_model();
  const auto support = invariant_support(nu);
  // Support points may coincide (here within the Y_0 = 0 branch), so hits and
  // masses are pooled by (branch, pi1, pi2). Points 1-4 belong to Y_0 = 1.
  using Key = std::tuple<int, long long, long long>;
  const auto grid = [](double v) { return std::llround(v * 1e12); };
  std::map<Key, double> expected;
  std::map<Key, int> hits;
  for (std::size_t i = 0; i < 8; ++i)
    expected[{i < 4 ? 1 : 0, grid(support[i].pi1), grid(support[i].pi2)}] += support[i].mass;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_stream(77, static_cast<std::uint64_t>(t));
    const auto path = sample_path(m.generator, nu, 50.0, rng);
    const auto y = noiseless_indicator_observation(path, m.indicator_states);
    const auto s = state_at(exact_jump_filter(nu, y), 50.0);
    const Key key{y.initial_value, grid(s.pi1), grid(s.pi2)};
    ASSERT_TRUE(expected.count(key)) << s.pi1 << ' ' << s.pi2;
    ++hits[key];
  }
  for (const auto& [key, p] : expected) {
    EXPECT_NEAR(hits[key] / static_cast<double>(trials), p,
                4.0 * std::sqrt(p * (1 - p) / trials) + 1e-12);
  }
}

TEST(Cyclic, SmallNoiseWonhamAgrees) {
  const auto nu = skewed();
  const auto m = build_cyclic_model();
  const auto model = ObservationModel::make(vec({1, 0, 1, 0}), 1e-3);
  Rng rng(3);
  const auto path = sample_path(m.generator, nu, 4.0, rng);
  const auto y = noiseless_indicator_observation(path, m.indicator_states);
  const auto exact = exact_jump_filter(nu, y);
  const auto noisy = run_filter(nu, synthesize_observations(path, model, 1e-4, rng), m.generator, model);
  std::vector<double> edges{0.0};
  edges.insert(edges.end(), y.jump_times.begin(), y.jump_times.end());
  edges.push_back(y.horizon);
  int checked = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (edges[k + 1] - edges[k] < 0.05) continue;
    const double t = 0.5 * (edges[k] + edges[k + 1]);
    const auto step = static_cast<std::size_t>(std::llround(t / 1e-4));
    EXPECT_LT((noisy.pis[step] - state_at(exact, t).full()).cwiseAbs().sum(), 0.05) << "t=" << t;
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Cyclic, PredictedGap) {
  EXPECT_NEAR(predicted_instability_gap(skewed(), ProbabilityVector::uniform(4)), 0.6, 1e-15);
  EXPECT_EQ(predicted_instability_gap(skewed(), skewed()), 0.0);
}

TEST(Cyclic, InstabilityDemoKeepsGap) {
  const auto report =
      instability_demo(skewed(), ProbabilityVector::uniform(4), 20.0, 50, 1, {0.0, 10.0, 20.0});
  ASSERT_EQ(report.mean_distance.size(), 3u);
  for (const auto& d : report.mean_distance) EXPECT_GT(d.mean, 0.3);
}

TEST(Examples, CyclicModelProperties) {
  const auto m = build_cyclic_model();
  const auto mu = invariant_measure(m.generator);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(mu[i], 0.25, 1e-15);
  EXPECT_EQ(decompose_classes(m.generator).class_count(), 1u);
  EXPECT_EQ(bound_mu_row(m.generator), 0.0);
}

TEST(Examples, GeneralPriorTables) {
  const auto nu = ProbabilityVector::from(vec({0.4, 0.3, 0.2, 0.1}));
  const double a = 0.4 / 0.6, b = 0.2 / 0.6, c = 0.3 / 0.4, d = 0.1 / 0.4;
  const double one[5][2] = {{a, 0}, {0, a}, {b, 0}, {0, b}, {a, 0}};
  // From Y_0 = 0 the chain leaves 2 for 3 and 4 for 1, so state 1 inherits
  // the weight of state 4 first.
  const double zero[5][2] = {{0, c}, {d, 0}, {0, d}, {c, 0}, {0, c}};
  const auto t1 = exact_jump_filter(nu, unit_jumps(1, 4));
  const auto t0 = exact_jump_filter(nu, unit_jumps(0, 4));
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(t1[k].state.pi1, one[k][0], 1e-14);
    EXPECT_NEAR(t1[k].state.pi2, one[k][1], 1e-14);
    EXPECT_NEAR(t0[k].state.pi1, zero[k][0], 1e-14);
    EXPECT_NEAR(t0[k].state.pi2, zero[k][1], 1e-14);
  }
  for (int y0 : {0, 1})
    for (const auto& row : reproduce_table(nu, y0, 12)) EXPECT_TRUE(row.match) << row.interval;
}

TEST(Examples, PointMassPriorTracksChain) {
  const auto m = build_cyclic_model();
  const auto nu = ProbabilityVector::point_mass(4, 0);
  Rng rng(5);
  const auto path = sample_path(m.generator, nu, 20.0, rng);
  const auto traj = exact_jump_filter(nu, noiseless_indicator_observation(path, m.indicator_states));
  for (double t = 0.05; t < 20.0; t += 0.1) {
    const Vector pi = state_at(traj, t).full();
    EXPECT_EQ(pi(static_cast<Eigen::Index>(path.state_at(t))), 1.0) << "t=" << t;
  }
}

TEST(Examples, SupportForUniformAndPointMass) {
  for (const auto& p : invariant_support(ProbabilityVector::uniform(4))) {
    EXPECT_DOUBLE_EQ(p.mass, 0.125);
    EXPECT_TRUE(p.pi1 == 0.5 || p.pi2 == 0.5);
  }
  const auto point = invariant_support(ProbabilityVector::point_mass(4, 0));
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(point[i].mass, i < 4 ? 0.25 : 0.0);
    EXPECT_TRUE(point[i].pi1 == 0.0 || point[i].pi1 == 1.0);
    EXPECT_TRUE(point[i].pi2 == 0.0 || point[i].pi2 == 1.0);
  }
}

TEST(Examples, LongRunTimeOccupation) {
  // One long path per Y_0 branch; time fractions within a branch are weighted
  // by the branch probability and matched to support points by value.
  const auto nu = ProbabilityVector::from(vec({0.4, 0.3, 0.2, 0.1}));
  const auto m = build_cyclic_model();
  const auto support = invariant_support(nu);
  const double horizon = 1e4;
  const double branch_weight[2] = {nu[1] + nu[3], nu[0] + nu[2]};
  bool seen[2] = {false, false};
  std::array<double, 8> occupation{};
  for (std::uint64_t s = 0; !(seen[0] && seen[1]); ++s) {
    Rng rng = make_stream(21, s);
    const auto path = sample_path(m.generator, nu, horizon, rng);
    const auto y = noiseless_indicator_observation(path, m.indicator_states);
    if (seen[y.initial_value]) continue;
    seen[y.initial_value] = true;
    const auto traj = exact_jump_filter(nu, y);
    const std::size_t base = y.initial_value == 1 ? 0 : 4;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double end = k + 1 < traj.size() ? traj[k + 1].start : horizon;
      std::size_t hit = 8;
      for (std::size_t i = base; i < base + 4; ++i)
        if (std::abs(traj[k].state.pi1 - support[i].pi1) < 1e-12 &&
            std::abs(traj[k].state.pi2 - support[i].pi2) < 1e-12)
          hit = i;
      ASSERT_LT(hit, 8u);
      occupation[hit] += (end - traj[k].start) / horizon * branch_weight[y.initial_value];
    }
  }
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(occupation[i], support[i].mass, 0.02) << i;
}

TEST(Examples, EqualPriorsNeverSeparate) {
  const auto report = instability_demo(skewed(), skewed(), 10.0, 20, 2, {0.0, 5.0, 10.0});
  for (const auto& d : report.mean_distance) EXPECT_EQ(d.mean, 0.0);
}

TEST(Examples, PersistentGapOnBranchOne) {
  const auto nu = skewed();
  const auto beta = ProbabilityVector::uniform(4);
  const auto a = exact_jump_filter(nu, unit_jumps(1, 8));
  const auto b = exact_jump_filter(beta, unit_jumps(1, 8));
  for (std::size_t k = 0; k < a.size(); ++k)
    EXPECT_NEAR(std::abs(a[k].state.pi1 - b[k].state.pi1) + std::abs(a[k].state.pi2 - b[k].state.pi2),
                0.375, 1e-14);
}
