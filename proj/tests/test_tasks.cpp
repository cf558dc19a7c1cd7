#include "pearl/tasks.hpp"

#include <gtest/gtest.h>

using namespace pearl;

TEST(Prey, AnalyticVelocityIsTheDerivative) {
  for (PreyKind k : {PreyKind::line, PreyKind::spiral, PreyKind::lemniscate}) {
    PreyParams p;
    p.kind = k;
    for (double t : {0.0, 1.3, 7.9, 18.2}) {
      const double h = 1e-6;
      const Vector fd = (analytic_prey(p, t + h).position - analytic_prey(p, t - h).position) / (2 * h);
      EXPECT_LT((fd - analytic_prey(p, t).velocity).norm(), 1e-6) << static_cast<int>(k) << " t=" << t;
    }
  }
}

TEST(Prey, StaticStaysAtOrigin) {
  PreyParams p;
  p.kind = PreyKind::static_point;
  const PreyState s = prey_reference(p, 12.0);
  EXPECT_EQ(s.position, Vector::Zero(2));
  EXPECT_EQ(s.velocity, Vector::Zero(2));
}

TEST(Prey, BrownianIsReplayable) {
  PreyParams p;
  p.kind = PreyKind::brownian;
  p.brownian_seed = 17;
  const PreyState a = prey_reference(p, 3.0), b = prey_reference(p, 3.0);
  EXPECT_EQ(a.position, b.position);
  EXPECT_GT(a.position.norm(), 0.0);
  p.brownian_seed = 18;
  EXPECT_NE(prey_reference(p, 3.0).position, a.position);
  EXPECT_THROW(prey_reference(p, -1.0), DimensionError);
}

TEST(Prey, SpiralRadiusGrowsLinearly) {
  PreyParams p;
  EXPECT_NEAR(analytic_prey(p, 10.0).position.norm(), 0.5, 1e-12);
  EXPECT_EQ(parse_prey_kind("lemniscate"), PreyKind::lemniscate);
  EXPECT_THROW(parse_prey_kind("circle"), DimensionError);
}

TEST(Obstacles, MeanSpeedOverModeDraws) {
  Rng rng(1);
  const int n = 100000;
  double linear = 0.0, arc = 0.0;
  Obstacle o;
  for (int i = 0; i < n; ++i) {
    resample_obstacle(o, rng);
    linear += o.speed;
    arc += o.omega * 5.0;
  }
  EXPECT_NEAR(linear / n, 0.37, 0.01);
  EXPECT_NEAR(arc / n, 0.37, 0.01);
}

TEST(Obstacles, LinearStepAndAntipodalWrap) {
  ObstacleParams p;
  p.count = 0;
  const ObstacleWorld w(p);
  Obstacle o;
  o.p = {1.0, 2.0};
  o.mode = ObstacleMode::linear;
  o.speed = 0.5;
  o.heading = 0.0;
  w.step_obstacle(o, 0.1);
  EXPECT_NEAR(o.p.x(), 1.05, 1e-12);
  EXPECT_NEAR(o.p.y(), 2.0, 1e-12);

  o.p = {49.99, 0.0};
  o.speed = 0.7;
  w.step_obstacle(o, 0.1);
  EXPECT_NEAR(o.p.x(), -50.0, 1e-9);
  EXPECT_NEAR(o.p.y(), 0.0, 1e-12);
}

TEST(Obstacles, ArcKeepsSpeedAndSwerveStaysWithinAmplitude) {
  ObstacleParams p;
  p.count = 0;
  const ObstacleWorld w(p);
  Obstacle o;
  o.mode = ObstacleMode::arc;
  o.omega = 0.088;
  o.p = {0.0, 0.0};
  const Eigen::Vector2d before = o.p;
  w.step_obstacle(o, 0.1);
  EXPECT_NEAR((o.p - before).norm(), 2 * 5.0 * std::sin(0.088 * 0.1 / 2), 1e-12);

  Obstacle sw;
  sw.mode = ObstacleMode::swerve;
  sw.speed = 0.2;
  sw.phi_max = 0.3;
  sw.heading = 1.0;
  for (int i = 0; i < 200; ++i) {
    w.step_obstacle(sw, 0.1);
    EXPECT_LE(std::abs(sw.phi), 0.3 + 1e-12);
    EXPECT_NEAR(sw.heading - sw.phi, 1.0, 1e-12);
  }
}

TEST(Obstacles, WorldIsSeededAndClearsEndpoints) {
  ObstacleParams p;
  p.count = 300;
  ObstacleWorld a(p), b(p);
  Rng ra(4), rb(4);
  a.reset(ra);
  b.reset(rb);
  for (int k = 0; k < 50; ++k) {
    a.advance(0.1, ra);
    b.advance(0.1, rb);
  }
  References x, y;
  a.observe(x);
  b.observe(y);
  EXPECT_EQ(x.point_set("obstacles"), y.point_set("obstacles"));
  Rng r(5);
  a.reset(r);
  for (const Obstacle& o : a.obstacles()) {
    EXPECT_GE((o.p - Eigen::Vector2d(25, 0)).norm(), 2.0);
    EXPECT_LE(o.p.norm(), 50.0);
  }
}

TEST(Obstacles, StaticWorldNeverMoves) {
  Parameters P;
  P.values["static_obstacles"] = std::vector<double>{3.0, 0.0, 0.0, 3.0};
  const Task t = make_obstacle_task(P);
  auto w = t.world->clone();
  Rng rng(1);
  w->reset(rng);
  for (int i = 0; i < 100; ++i) w->advance(0.1, rng);
  References refs;
  w->observe(refs);
  const PointSet& s = refs.point_set("obstacles");
  ASSERT_EQ(s.rows(), 2);
  EXPECT_EQ(s(0, 0), 3.0);
  EXPECT_EQ(s(1, 1), 3.0);
  EXPECT_TRUE(w->collides(State{{3.1, 0.0, 0.0, 0.0}}));
  EXPECT_FALSE(w->collides(State{{3.6, 0.0, 0.0, 0.0}}));
}

TEST(Apf, PullsTowardGoalAndAwayFromObstacle) {
  const State s{{1.0, 0.0, 0.0, 0.0}};
  const Action a = gaussian_apf_policy(s, Vector::Zero(2), PointSet(0, 2), 1.0, 0.45, 0.37, 3.0, 0.1);
  EXPECT_LT(a[0], 0.0);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  PointSet obs(1, 2);
  obs << 0.0, 0.2;
  const Action b = gaussian_apf_policy(State{{0.0, 0.0, 0.0, 0.0}}, Vector::Zero(2), obs, 1.0, 0.45, 0.37, 3.0, 0.1);
  EXPECT_LT(b[1], 0.0);
}

TEST(Cargo, SwingPeriodMatchesPendulum) {
  const Task t = make_cargo_task();
  State s = State::Zero(10);
  s[3] = 0.05;
  const double L = 0.62, expected = 2 * std::numbers::pi * std::sqrt(L / kGravity);
  // Zero-order-hold carrier accelerations of zero leave the pendulum coupled to
  // a free carrier; the period is measured from upward zero crossings.
  std::vector<double> crossings;
  double prev = s[3];
  for (int k = 1; k < 2000; ++k) {
    const State n = step(*t.dynamics, s, Action::Zero(3));
    if (prev < 0.0 && n[3] >= 0.0) crossings.push_back((k - 1 + prev / (prev - n[3])) * t.dt());
    prev = n[3];
    s = n;
  }
  ASSERT_GE(crossings.size(), 3u);
  const double period = (crossings.back() - crossings.front()) / (crossings.size() - 1);
  EXPECT_NEAR(period, expected, 0.02 * expected);
}

TEST(Pendulum, UprightIsUnstable) {
  const Task t = make_pendulum_task();
  State s = State::Zero(10);
  s[3] = 1e-3;
  for (int k = 0; k < 100; ++k) s = step(*t.dynamics, s, Action::Zero(2));
  EXPECT_GT(std::abs(s[3]), 0.01);
  Rng rng(0);
  EXPECT_NEAR(t.sample_initial(rng)[3], std::sin(23.0 * std::numbers::pi / 180), 1e-12);
  EXPECT_EQ(t.phase_at(4.99), 0);
  EXPECT_EQ(t.phase_at(5.0), 1);
}

TEST(Boids, SeparationCohesionAndPreyRules) {
  // Two agents 0.05 m apart, prey far ahead: separation pushes them apart on x.
  State s = State::Zero(8);
  s[0] = 0.0;
  s[2] = 0.05;
  const Action a = boids_policy(s, 2, Vector::Zero(2), Vector::Zero(2), 100.0);
  EXPECT_LT(a[0], a[2]);
  const double sep = 1.0 / 0.05;
  EXPECT_NEAR(a[2] - a[0], 2 * sep + 0.01 * (-0.05 - 0.05) + 1.0 * (-0.05 - 0.0), 1e-9);

  // A lone agent only follows the prey rules.
  State one = State::Zero(4);
  one[0] = 1.0;
  const Action b = boids_policy(one, 1, Vector::Zero(2), Vector{{0.5, 0.0}}, 100.0);
  EXPECT_NEAR(b[0], -1.0 + 0.1 * 0.5, 1e-12);
  const Action c = boids_policy(one, 1, Vector::Zero(2), Vector{{0.5, 0.0}}, 0.5);
  EXPECT_NEAR(c[0], -0.5, 1e-12);
}

TEST(Pursuit, MetricsOnKnownConfiguration) {
  State s = State::Zero(8);
  s.segment<2>(0) << 3.0, 4.0;
  s.segment<2>(2) << 0.0, 1.0;
  EXPECT_NEAR(mean_prey_distance(s, 2, Vector::Zero(2)), 3.0, 1e-12);
  EXPECT_NEAR(mean_nearest_neighbor(s, 2), std::sqrt(18.0), 1e-12);
}

TEST(Tasks, DimensionsAndPublishedWeights) {
  struct Row {
    const char* name;
    int ds, da, np;
  };
  for (const Row& r : {Row{"pursuit", 50, 50, 3}, Row{"obstacles", 2, 2, 2}, Row{"cargo", 5, 3, 4},
                       Row{"rendezvous", 8, 5, 5}, Row{"pendulum", 5, 2, 5}, Row{"double-integrator", 1, 1, 2}}) {
    const Task t = make_task(r.name);
    EXPECT_EQ(t.layout.position_dim(), r.ds) << r.name;
    EXPECT_EQ(t.action_dim(), r.da) << r.name;
    EXPECT_EQ(t.size(), r.np) << r.name;
    EXPECT_EQ(t.published_theta.size(), r.np) << r.name;
  }
  EXPECT_THROW(make_task("nope"), DimensionError);
  Parameters bad;
  bad.values["agentz"] = 3.0;
  EXPECT_THROW(make_pursuit_task(bad), DimensionError);
}

TEST(Rendezvous, StartsWithinDistanceAndAboveGround) {
  const Task t = make_rendezvous_task();
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const State s = t.sample_initial(rng);
    EXPECT_LE(s.head<3>().norm(), 10.0 + 1e-12);
    EXPECT_GE(s[2], 0.6);
  }
}
