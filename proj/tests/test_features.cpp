#include "pearl/tasks.hpp"

#include <gtest/gtest.h>

using namespace pearl;

namespace {

// Straight-from-the-definition feature value, no incremental bookkeeping.
double naive_feature(const StateLayout& L, const State& s, const Preference& p, const References& refs) {
  auto coord = [&](int body, int axis) {
    return p.space == Space::position ? L.position_index(body, axis) : L.velocity_index(body, axis);
  };
  auto phi = [&](double q) { return p.kind == PreferenceKind::attractor ? q : 1.0 / (p.beta + q); };
  std::vector<int> bodies;
  for (const auto& a : p.agents) bodies.push_back(L.body(a));
  double F = 0.0;
  switch (p.target) {
    case TargetKind::point:
    case TargetKind::reference:
    case TargetKind::relation:
      for (int b : bodies) {
        double q = 0.0;
        for (std::size_t k = 0; k < p.axes.size(); ++k) {
          double target = 0.0;
          if (p.target == TargetKind::point) target = p.point[k];
          if (p.target == TargetKind::reference) target = refs.vector(p.reference)[p.axes[k]];
          if (p.target == TargetKind::relation)
            target = s[coord(L.body(p.partner), p.axes[k])] + (p.offset.empty() ? 0.0 : p.offset[k]);
          q += std::pow(s[coord(b, p.axes[k])] - target, 2);
        }
        F += phi(q);
      }
      break;
    case TargetKind::pairwise: {
      double q = 0.0;
      for (int i : bodies)
        for (int j : bodies)
          for (int ax : p.axes) q += std::pow(s[coord(i, ax)] - s[coord(j, ax)], 2);
      F = phi(q);
      break;
    }
    case TargetKind::nearest: {
      const PointSet& set = refs.point_set(p.reference);
      for (int b : bodies) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < set.rows(); ++r) {
          double d = 0.0;
          for (std::size_t k = 0; k < p.axes.size(); ++k) d += std::pow(s[coord(b, p.axes[k])] - set(r, k), 2);
          best = std::min(best, d);
        }
        F += phi(best);
      }
      break;
    }
  }
  return F;
}

References refs_for(const Task& t, std::uint64_t seed) {
  References refs;
  if (t.world) {
    auto w = t.world->clone();
    Rng rng(seed);
    w->reset(rng);
    for (int i = 0; i < 7; ++i) w->advance(t.dt(), rng);
    w->observe(refs);
  }
  return refs;
}

State random_state(int n, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  State s(n);
  for (int i = 0; i < n; ++i) s[i] = u(rng);
  return s;
}

}  // namespace

class EveryTask : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryTask, FeaturesMatchNaiveOracle) {
  Parameters P;
  if (GetParam() == "pursuit") P.values["agents"] = 6.0;
  if (GetParam() == "obstacles") P.values["obstacles"] = 40.0;
  const Task t = make_task(GetParam(), P);
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const References refs = refs_for(t, trial);
    const State s = random_state(t.layout.state_dim(), rng, GetParam() == "obstacles" ? 30.0 : 2.0);
    const Vector F = t.model().features(s, refs);
    for (int i = 0; i < t.size(); ++i) {
      const double want = naive_feature(t.layout, s, t.preferences[i], refs);
      EXPECT_NEAR(F[i], want, 1e-10 * std::max(1.0, std::abs(want))) << t.preferences[i].name;
    }
  }
}

TEST_P(EveryTask, ProbeDeltaMatchesFullRecompute) {
  Parameters P;
  if (GetParam() == "pursuit") P.values["agents"] = 6.0;
  if (GetParam() == "obstacles") P.values["obstacles"] = 40.0;
  const Task t = make_task(GetParam(), P);
  Rng rng(7);
  const References refs = refs_for(t, 3);
  const int n = t.layout.state_dim();
  std::uniform_int_distribution<int> coord(0, n - 1);
  std::uniform_real_distribution<double> mag(-0.5, 0.5);
  for (int trial = 0; trial < 30; ++trial) {
    const State s = random_state(n, rng, 2.0);
    Probe probe(t.model(), s, refs);
    for (int rep = 0; rep < 5; ++rep) {
      SparseVector delta;
      State moved = s;
      const int nnz = 1 + rep;
      for (int k = 0; k < nnz; ++k) {
        SparseEntry e{coord(rng), mag(rng)};
        delta.push_back(e);
        moved[e.index] += e.value;
      }
      const Vector want = t.model().features(moved, refs) - t.model().features(s, refs);
      const Vector got = probe.delta_features(delta);
      for (int i = 0; i < t.size(); ++i)
        EXPECT_NEAR(got[i], want[i], 1e-9 * std::max(1.0, std::abs(t.model().features(s, refs)[i])));
      const double dv = probe.delta_value(t.published_theta, delta);
      EXPECT_NEAR(dv, t.published_theta.dot(want), 1e-9 * std::max(1.0, t.published_theta.cwiseAbs().sum()));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Tasks, EveryTask,
                         ::testing::Values("pursuit", "obstacles", "cargo", "rendezvous", "pendulum", "double-integrator"));

TEST(Features, AttractorAndRepellerExamples) {
  const StateLayout L({{"r", 2}});
  Preference a;
  a.name = "a";
  a.axes = {0, 1};
  a.agents = {"r"};
  a.point = {1.0, 2.0};
  const State s{{4.0, 6.0, 0.0, 0.0}};
  EXPECT_DOUBLE_EQ(attractor_feature(L, s, a, {}), 25.0);
  Preference r = a;
  r.kind = PreferenceKind::repeller;
  r.beta = 0.5;
  EXPECT_DOUBLE_EQ(repeller_feature(L, s, r, {}), 1.0 / 25.5);
  EXPECT_THROW(attractor_feature(L, s, r, {}), DimensionError);
  EXPECT_THROW(repeller_feature(L, s, a, {}), DimensionError);
}

TEST(Features, EmptyPointSetMakesRepellerVanish) {
  const StateLayout L({{"r", 2}});
  Preference p;
  p.kind = PreferenceKind::repeller;
  p.axes = {0, 1};
  p.agents = {"r"};
  p.target = TargetKind::nearest;
  p.reference = "obs";
  p.beta = 0.1;
  References refs;
  refs.point_sets["obs"] = PointSet(0, 2);
  EXPECT_EQ(repeller_feature(L, State::Zero(4), p, refs), 0.0);
  const FeatureModel m(L, {p});
  Probe probe(m, State::Zero(4), refs);
  const std::vector<SparseEntry> move{{0, 1.5}, {1, -0.5}};
  EXPECT_EQ(probe.delta_features(move)[0], 0.0);
}

TEST(Features, ValidationNamesTheProblem) {
  const StateLayout L({{"r", 2}});
  Preference p;
  p.name = "goal";
  p.axes = {0, 1};
  p.agents = {"r"};
  p.point = {0.0};
  try {
    FeatureModel(L, {p});
    FAIL() << "expected a DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("goal"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("point"), std::string::npos);
  }
  p.point = {0.0, 0.0};
  p.agents = {"ghost"};
  EXPECT_THROW(FeatureModel(L, {p}), DimensionError);
  p.agents = {"r"};
  p.axes = {0, 2};
  EXPECT_THROW(FeatureModel(L, {p}), DimensionError);
  p.axes = {};
  EXPECT_THROW(FeatureModel(L, {p}), DimensionError);
  p.axes = {0};
  p.point = {0.0};
  p.kind = PreferenceKind::repeller;
  p.beta = 0.0;
  EXPECT_THROW(FeatureModel(L, {p}), DimensionError);

  const FeatureModel ok(L, {detail::point_pref("x", Space::position, {0}, "r", {0.0})});
  EXPECT_THROW(ok.features(State::Zero(3), {}), DimensionError);
  EXPECT_THROW(ok.value(State::Zero(4), Vector::Zero(2), {}), DimensionError);
  EXPECT_THROW(ok.features(State::Constant(4, std::nan("")), {}), NumericError);
}

TEST(Features, MissingReferenceIsReported) {
  const Task t = make_pursuit_task();
  EXPECT_THROW(t.model().features(State::Zero(t.layout.state_dim()), {}), DimensionError);
}

TEST(Layout, Naming) {
  const StateLayout L({{"quad", 3}, {"load", 2}});
  EXPECT_EQ(L.state_dim(), 10);
  EXPECT_EQ(L.position_index(1, 1), 4);
  EXPECT_EQ(L.velocity_index(0, 2), 7);
  EXPECT_EQ(L.coordinate_name(4), "p_load_1");
  EXPECT_EQ(L.coordinate_name(5), "v_quad_0");
  EXPECT_THROW(L.coordinate_name(10), DimensionError);
  EXPECT_THROW(StateLayout({{"a", 1}, {"a", 1}}), DimensionError);
}

TEST(Features, ObstacleRepellerAtHalfMetre) {
  Parameters P;
  P.values["goal"] = std::vector<double>{0.0, 0.0};
  P.values["static_obstacles"] = std::vector<double>{0.5, 0.0, 10.0, 10.0};
  const Task t = make_obstacle_task(P);
  const Vector F = t.model().features(State::Zero(4), t.initial_refs());
  EXPECT_NEAR(F[1], 1.0 / (0.01 + 0.25), 1e-12);
}

TEST(Features, PursuitOnlyDistantAgentContributes) {
  Parameters P;
  P.values["agents"] = 2.0;
  const Task t = make_pursuit_task(P);
  References refs;
  refs.vectors["prey_position"] = Vector{{0.3, -0.2}};
  refs.vectors["prey_velocity"] = Vector{{0.1, 0.2}};
  // agent0 sits on the prey's state, agent1 is 1 m away with a velocity error of (0.5, -0.5)
  const State s{{0.3, -0.2, 1.3, -0.2, 0.1, 0.2, 0.6, -0.3}};
  const Vector F = t.model().features(s, refs);
  EXPECT_NEAR(F[0], 1.0, 1e-12);
  EXPECT_NEAR(F[1], 0.5, 1e-12);
  // ordered pairs: 2 * 1 m^2 inside a single reciprocal
  EXPECT_NEAR(F[2], 1.0 / (1.0 + 2.0), 1e-12);
  const Vector theta{{-16.43, -102.89, -0.77}};
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const State r = random_state(8, rng, 3.0);
    const double v = t.model().value(r, theta, refs);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, 0.0);
  }
}
