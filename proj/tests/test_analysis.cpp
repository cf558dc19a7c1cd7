#include "oracles.hpp"
#include "pearl/tasks.hpp"

#include <gtest/gtest.h>

using namespace pearl;

TEST(RestrictedValue, Examples) {
  EXPECT_DOUBLE_EQ(vx(0.0, {1.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(vx(2.0, {3.0, 1.0}), 4.0 + 1.5);
  EXPECT_THROW(critical_points({-1.0, 0.5}), DimensionError);
  EXPECT_THROW(critical_points({1.0, 0.5}, 2.0, 1.0), DimensionError);
}

TEST(RestrictedValue, DerivativesMatchFiniteDifferences) {
  for (const RestrictedValueParams p : {RestrictedValueParams{5.0, 0.3}, RestrictedValueParams{100.0, 2.0}}) {
    for (double x : {-3.0, -0.4, 0.7, 1.6, 4.2}) {
      const double h = 1e-5;
      EXPECT_NEAR(dvx(x, p), (vx(x + h, p) - vx(x - h, p)) / (2 * h), 1e-5 * std::max(1.0, std::abs(dvx(x, p))));
      EXPECT_NEAR(d2vx(x, p), (dvx(x + h, p) - dvx(x - h, p)) / (2 * h), 1e-5 * std::max(1.0, std::abs(d2vx(x, p))));
    }
  }
}

TEST(RestrictedValue, NumeratorPolynomialMatchesDerivative) {
  const RestrictedValueParams p{7.0, 0.8};
  const auto a = dvx_numerator(p);
  for (double x : {-2.0, 0.0, 0.5, 3.0}) {
    const double D = (x - 1) * (x - 1) + p.d * p.d;
    EXPECT_NEAR(detail::poly_eval(a, x), 0.5 * D * D * dvx(x, p), 1e-10 * std::max(1.0, std::abs(detail::poly_eval(a, x))));
  }
}

TEST(RestrictedValue, ZeroRepellerHasSingleMinimumAtGoal) {
  const auto pts = critical_points({0.0, 1.0});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NEAR(pts[0].x, 0.0, 1e-10);
  EXPECT_EQ(pts[0].kind, ExtremumKind::min);
  EXPECT_FALSE(pts[0].outside_goal_gap);
}

TEST(CriticalPoints, MatchDenseGridOracle) {
  for (double c : {0.5, 5.0, 20.0, 100.0})
    for (double d : {0.0, 0.1, 0.5, 1.0, 2.0}) {
      const RestrictedValueParams p{c, d};
      const auto got = critical_points(p, -10.0, 10.0);
      const auto want = oracle::grid_critical_points(p, -10.0, 10.0, 1e-5);
      ASSERT_EQ(got.size(), want.size()) << "c=" << c << " d=" << d;
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i].x, want[i], 1e-4);
        EXPECT_LT(std::abs(dvx(got[i].x, p)), 1e-6 * std::max(1.0, std::abs(d2vx(got[i].x, p))));
        EXPECT_EQ(got[i].kind, d2vx(got[i].x, p) > 0 ? ExtremumKind::min : ExtremumKind::max);
        EXPECT_EQ(got[i].beyond_obstacle_width, std::abs(got[i].x - 1.0) > d);
        EXPECT_EQ(got[i].outside_goal_gap, got[i].x < -1.0 || got[i].x > 0.0);
      }
    }
}

TEST(CriticalPoints, KnownConfiguration) {
  // c = 100, d = 0.5: one minimum either side of the obstacle and a maximum between.
  const auto pts = critical_points({100.0, 0.5});
  const auto m = minima(pts);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_LT(m[0].x, -1.0);
  EXPECT_GT(m[1].x, 1.5);
  EXPECT_EQ(pts.size(), 3u);
}

TEST(CriticalPoints, RestrictionOfObstacleValueFunction) {
  // Goal at the origin and an obstacle at (1, 0) with beta = d^2 restrict, on
  // y = 0, to -V = x^2 + c / ((x - 1)^2 + d^2).
  const double c = 20.0, d = 0.5;
  Parameters P;
  P.values["goal"] = std::vector<double>{0.0, 0.0};
  P.values["static_obstacles"] = std::vector<double>{1.0, 0.0};
  P.values["beta"] = d * d;
  const Task t = make_obstacle_task(P);
  const References refs = t.initial_refs();
  const Vector theta{{-1.0, -c}};
  auto V = [&](double x, double y) { return t.model().value(State{{x, y, 0.0, 0.0}}, theta, refs); };
  for (double x : {-2.0, 0.3, 1.7})
    EXPECT_NEAR(-V(x, 0.0), vx(x, {c, d}), 1e-12 * vx(x, {c, d}));
  // Across the axis the curvature of -V is 2 - 2c / D^2: the far-side minimum
  // of V_x is a saddle of the planar function when that is negative.
  for (const auto& cp : minima(critical_points({c, d}))) {
    const double h = 1e-4, D = (cp.x - 1) * (cp.x - 1) + d * d;
    const double fd = -(V(cp.x, h) - 2 * V(cp.x, 0.0) + V(cp.x, -h)) / (h * h);
    EXPECT_NEAR(fd, 2.0 - 2.0 * c / (D * D), 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Stability, HoldsForCoveringNegativeWeights) {
  const Task di = make_double_integrator_task();
  EXPECT_TRUE(check_attractor_stability(Vector{{-1.0, -1.0}}, di.layout, di.preferences).holds);
  const Task cargo = make_cargo_task();
  const StabilityReport r = check_attractor_stability(cargo.published_theta, cargo.layout, cargo.preferences);
  EXPECT_TRUE(r.holds) << r.reason;
  EXPECT_EQ(r.rank, 10);
}

TEST(Stability, ReportsOffendingWeight) {
  const Task di = make_double_integrator_task();
  const StabilityReport r = check_attractor_stability(Vector{{-1.0, 0.0}}, di.layout, di.preferences);
  EXPECT_FALSE(r.holds);
  ASSERT_TRUE(r.offending_weight.has_value());
  EXPECT_EQ(*r.offending_weight, 1);
  EXPECT_NE(r.reason.find("velocity"), std::string::npos);
}

TEST(Stability, ReportsUncoveredCoordinates) {
  const Task cargo = make_cargo_task();
  const std::vector<Preference> prefs{cargo.preferences[0], cargo.preferences[2]};
  const StabilityReport r = check_attractor_stability(Vector{{-1.0, -1.0}}, cargo.layout, prefs);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.uncovered, (std::vector<int>{3, 4, 8, 9}));
  EXPECT_NE(r.reason.find("p_load_0"), std::string::npos);
}

TEST(Stability, RelationsAloneLeaveRankDeficit) {
  const Task t = make_rendezvous_task();
  const StabilityReport r = check_attractor_stability(t.published_theta, t.layout, t.preferences);
  EXPECT_FALSE(r.holds);
  EXPECT_TRUE(r.uncovered.empty());
  EXPECT_EQ(r.rank, 10);
  EXPECT_NE(r.reason.find("rank"), std::string::npos);
}

TEST(Stability, PairwiseAndRepellerHandling) {
  Parameters P;
  P.values["agents"] = 3.0;
  const Task t = make_pursuit_task(P);
  EXPECT_THROW(check_attractor_stability(t.published_theta, t.layout, t.preferences), DimensionError);
  const std::vector<Preference> attr{t.preferences[0], t.preferences[1]};
  EXPECT_TRUE(check_attractor_stability(Vector{{-1.0, -1.0}}, t.layout, attr).holds);
  EXPECT_THROW(check_attractor_stability(Vector{{-1.0}}, t.layout, attr), DimensionError);
}

TEST(CriticalPoints, WideObstacleLeavesOneMinimumNearGoal) {
  const auto m = minima(critical_points({100.0, 100.0}));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m[0].x, 0.0, 0.01);
}

TEST(CriticalPoints, MinimumCountDropsAsObstacleWidens) {
  std::vector<std::size_t> counts;
  for (double d : {0.5, 1.0, 2.0, 5.0}) counts.push_back(minima(critical_points({100.0, d})).size());
  EXPECT_EQ(counts.front(), 2u);
  EXPECT_EQ(counts.back(), 1u);
  EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
}
