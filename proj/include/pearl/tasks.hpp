#pragma once
// The case-study environments: pursuit, dynamic obstacles, cargo delivery,
// rendezvous and the flying inverted pendulum, plus the Boids and Gaussian APF
// baselines.

#include "pearl/task.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace pearl {

inline constexpr double kGravity = 9.81;

namespace detail {

inline Preference make_pref(std::string name, PreferenceKind kind, Space space, std::vector<int> axes,
                            std::vector<std::string> agents, TargetKind target) {
  Preference p;
  p.name = std::move(name);
  p.kind = kind;
  p.space = space;
  p.axes = std::move(axes);
  p.agents = std::move(agents);
  p.target = target;
  return p;
}

inline Preference point_pref(std::string name, Space space, std::vector<int> axes, std::string agent,
                             std::vector<double> point) {
  Preference p = make_pref(std::move(name), PreferenceKind::attractor, space, std::move(axes), {std::move(agent)},
                           TargetKind::point);
  p.point = std::move(point);
  return p;
}

inline Preference relation_pref(std::string name, Space space, std::vector<int> axes, std::string agent,
                                std::string partner, std::vector<double> offset) {
  Preference p = make_pref(std::move(name), PreferenceKind::attractor, space, std::move(axes), {std::move(agent)},
                           TargetKind::relation);
  p.partner = std::move(partner);
  p.offset = std::move(offset);
  return p;
}

inline Vector uniform_in_disk(Rng& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng)), a = 2.0 * std::numbers::pi * u(rng);
  return Vector{{r * std::cos(a), r * std::sin(a)}};
}

inline Vector uniform_in_ball(Rng& rng, double radius) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector d{{n(rng), n(rng), n(rng)}};
  return d.normalized() * radius * std::cbrt(u(rng));
}

// Horizontal suspended load (stable) or inverted pendulum (unstable) coupled to
// a double-integrator carrier on one axis. coords: {carrier p, swing, carrier v, swing rate}.
inline void add_swing_axis(BlockLinearDynamics& dyn, std::array<int, 4> coords, int input, double g, double L,
                           bool inverted) {
  Matrix Ac = Matrix::Zero(4, 4), Bc = Matrix::Zero(4, 1);
  Ac(0, 2) = 1.0;
  Ac(1, 3) = 1.0;
  Ac(3, 1) = inverted ? g / L : -g / L;
  Bc(2, 0) = 1.0;
  Bc(3, 0) = inverted ? -1.0 : -1.0 / L;
  dyn.add_continuous_block({coords.begin(), coords.end()}, {input}, Ac, Bc);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pursuit

enum class PreyKind { static_point, line, spiral, lemniscate, brownian };

inline PreyKind parse_prey_kind(const std::string& s) {
  if (s == "static") return PreyKind::static_point;
  if (s == "line") return PreyKind::line;
  if (s == "spiral") return PreyKind::spiral;
  if (s == "lemniscate") return PreyKind::lemniscate;
  if (s == "brownian") return PreyKind::brownian;
  throw DimensionError("unknown prey kind '" + s + "'");
}

struct PreyParams {
  PreyKind kind = PreyKind::spiral;
  double spiral_rate = 0.05;    // m/s, r(t) = rate * t
  double spiral_omega = 0.5;    // rad/s
  double lemniscate_scale = 4.0;
  double lemniscate_omega = 0.25;
  Vector line_velocity = Vector{{0.3, 0.1}};
  double brownian_sigma = 1.0;  // m/s^2 per axis
  std::uint64_t brownian_seed = 0;
};

struct PreyState {
  Vector position, velocity;
};

inline PreyState analytic_prey(const PreyParams& p, double t) {
  switch (p.kind) {
    case PreyKind::static_point:
    case PreyKind::brownian:
      return {Vector::Zero(2), Vector::Zero(2)};
    case PreyKind::line:
      return {p.line_velocity * t, p.line_velocity};
    case PreyKind::spiral: {
      const double w = p.spiral_omega, r = p.spiral_rate * t, c = std::cos(w * t), s = std::sin(w * t);
      return {Vector{{r * c, r * s}}, Vector{{p.spiral_rate * c - r * w * s, p.spiral_rate * s + r * w * c}}};
    }
    case PreyKind::lemniscate: {
      // Gerono: x = A sin(wt), y = A sin(wt) cos(wt).
      const double A = p.lemniscate_scale, w = p.lemniscate_omega;
      return {Vector{{A * std::sin(w * t), 0.5 * A * std::sin(2.0 * w * t)}},
              Vector{{A * w * std::cos(w * t), A * w * std::cos(2.0 * w * t)}}};
    }
  }
  throw DimensionError("unknown prey kind");
}

class PreyWorld final : public World {
 public:
  PreyWorld(PreyParams p, double dt) : p_(std::move(p)), dt_(dt) { restart(); }

  std::unique_ptr<World> clone() const override { return std::make_unique<PreyWorld>(*this); }
  void reset(Rng&) override { restart(); }
  void observe(References& refs) const override {
    refs.vectors["prey_position"] = state_.position;
    refs.vectors["prey_velocity"] = state_.velocity;
  }
  void advance(double dt, Rng&) override {
    t_ += dt;
    if (p_.kind == PreyKind::brownian) {
      std::normal_distribution<double> n(0.0, p_.brownian_sigma);
      const Vector acc{{n(brownian_), n(brownian_)}};
      state_.position += state_.velocity * dt + 0.5 * acc * dt * dt;
      state_.velocity += acc * dt;
    } else {
      state_ = analytic_prey(p_, t_);
    }
  }
  double time() const { return t_; }
  const PreyState& state() const { return state_; }

 private:
  void restart() {
    t_ = 0.0;
    brownian_.seed(p_.brownian_seed);
    state_ = analytic_prey(p_, 0.0);
  }

  PreyParams p_;
  double dt_;
  double t_ = 0.0;
  PreyState state_;
  Rng brownian_;
};

// Prey position and velocity at time t. The Brownian kind is replayed from its
// seed in steps of dt.
inline PreyState prey_reference(const PreyParams& p, double t, double dt = 0.02) {
  if (t < 0.0) throw DimensionError("prey time must be non-negative");
  if (p.kind != PreyKind::brownian) return analytic_prey(p, t);
  PreyWorld w(p, dt);
  Rng unused;
  const long n = static_cast<long>(std::floor(t / dt + 1e-9));
  for (long k = 0; k < n; ++k) w.advance(dt, unused);
  return w.state();
}

inline std::string agent_name(int i) { return "agent" + std::to_string(i); }

// Reynolds flock with two prey rules, weights for separation, alignment,
// cohesion, prey alignment and prey cohesion.
struct BoidsWeights {
  double separation = 1.0, alignment = 0.01, cohesion = 0.01, prey_alignment = 0.1, prey_cohesion = 1.0;
  double separation_radius = 0.1;
};

inline Action boids_policy(const State& s, int agents, const Vector& prey_pos, const Vector& prey_vel, double accel,
                           const BoidsWeights& w = {}) {
  const int ds = 2 * agents;
  if (s.size() != 2 * ds) throw DimensionError("boids: state does not match agent count");
  Eigen::Vector2d pos_sum = Eigen::Vector2d::Zero(), vel_sum = Eigen::Vector2d::Zero();
  for (int i = 0; i < agents; ++i) {
    pos_sum += s.segment<2>(2 * i);
    vel_sum += s.segment<2>(ds + 2 * i);
  }
  Action a(ds);
  for (int i = 0; i < agents; ++i) {
    const Eigen::Vector2d x = s.segment<2>(2 * i), v = s.segment<2>(ds + 2 * i);
    Eigen::Vector2d sep = Eigen::Vector2d::Zero();
    for (int j = 0; j < agents; ++j) {
      if (j == i) continue;
      const Eigen::Vector2d d = x - s.segment<2>(2 * j);
      const double n2 = d.squaredNorm();
      if (n2 < w.separation_radius * w.separation_radius && n2 > 0.0) sep += d / n2;
    }
    Eigen::Vector2d align = Eigen::Vector2d::Zero(), coh = Eigen::Vector2d::Zero();
    if (agents > 1) {
      align = (vel_sum - v) / (agents - 1) - v;
      coh = (pos_sum - x) / (agents - 1) - x;
    }
    const Eigen::Vector2d cmd = w.separation * sep + w.alignment * align + w.cohesion * coh +
                                w.prey_alignment * (prey_vel - v) + w.prey_cohesion * (prey_pos - x);
    a.segment<2>(2 * i) = cmd.cwiseMax(-accel).cwiseMin(accel);
  }
  return a;
}

// Mean distance from agents to the prey.
inline double mean_prey_distance(const State& s, int agents, const Vector& prey) {
  double acc = 0.0;
  for (int i = 0; i < agents; ++i) acc += (s.segment<2>(2 * i) - prey.head<2>()).norm();
  return acc / agents;
}

// Mean distance from each agent to its nearest teammate.
inline double mean_nearest_neighbor(const State& s, int agents) {
  if (agents < 2) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < agents; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < agents; ++j)
      if (j != i) best = std::min(best, (s.segment<2>(2 * i) - s.segment<2>(2 * j)).norm());
    acc += best;
  }
  return acc / agents;
}

inline Task make_pursuit_task(const Parameters& P = {}) {
  P.check_known("pursuit", {"agents", "prey", "spiral_rate", "spiral_omega", "lemniscate_scale", "lemniscate_omega",
                            "line_velocity", "brownian_sigma", "brownian_seed", "start_radius", "accel", "dt",
                            "horizon", "beta", "goal_tolerance"});
  const int n = P.integer("agents", 25);
  if (n < 1) throw DimensionError("pursuit needs at least one agent");
  const double dt = P.number("dt", 0.02), accel = P.number("accel", 3.0), radius = P.number("start_radius", 5.0);
  PreyParams prey;
  prey.kind = parse_prey_kind(P.text("prey", "spiral"));
  prey.spiral_rate = P.number("spiral_rate", prey.spiral_rate);
  prey.spiral_omega = P.number("spiral_omega", prey.spiral_omega);
  prey.lemniscate_scale = P.number("lemniscate_scale", prey.lemniscate_scale);
  prey.lemniscate_omega = P.number("lemniscate_omega", prey.lemniscate_omega);
  auto lv = P.list("line_velocity", {0.3, 0.1});
  if (lv.size() != 2) throw DimensionError("line_velocity needs 2 entries");
  prey.line_velocity = Vector{{lv[0], lv[1]}};
  prey.brownian_sigma = P.number("brownian_sigma", prey.brownian_sigma);
  prey.brownian_seed = static_cast<std::uint64_t>(P.integer("brownian_seed", 0));

  Task task;
  task.name = "pursuit";
  std::vector<Body> bodies;
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    bodies.push_back({agent_name(i), 2});
    names.push_back(agent_name(i));
  }
  task.layout = StateLayout(bodies);
  auto dyn = std::make_shared<BlockLinearDynamics>(2 * n, 2 * n, dt);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) dyn->add_double_integrator(2 * i + k, 2 * n + 2 * i + k, 2 * i + k);
  dyn->validate();
  task.dynamics = dyn;

  Preference f1 = detail::make_pref("prey_distance", PreferenceKind::attractor, Space::position, {0, 1}, names,
                                    TargetKind::reference);
  f1.reference = "prey_position";
  Preference f2 = detail::make_pref("prey_velocity", PreferenceKind::attractor, Space::velocity, {0, 1}, names,
                                    TargetKind::reference);
  f2.reference = "prey_velocity";
  Preference f3 = detail::make_pref("agent_spread", PreferenceKind::repeller, Space::position, {0, 1}, names,
                                    TargetKind::pairwise);
  f3.beta = P.number("beta", 1.0);
  task.preferences = {f1, f2, f3};
  task.accel_limit = Vector::Constant(2 * n, accel);
  task.goal.tolerance = P.number("goal_tolerance", 0.05);
  task.horizon = P.number("horizon", 20.0);
  task.published_theta = Vector{{-16.43, -102.89, -0.77}};
  task.world = std::make_shared<PreyWorld>(prey, dt);
  task.sample_initial = [n, radius](Rng& rng) {
    State s = State::Zero(4 * n);
    for (int i = 0; i < n; ++i) s.segment<2>(2 * i) = detail::uniform_in_disk(rng, radius);
    return s;
  };
  task.metric = [n](const State& s, const References& r) { return mean_prey_distance(s, n, r.vector("prey_position")); };
  task.metric_name = "mean_prey_distance";
  task.boids = [n, accel](const Task&, const State& s, const References& r, const PolicyConfig&) {
    return boids_policy(s, n, r.vector("prey_position"), r.vector("prey_velocity"), accel);
  };
  task.finalize();
  return task;
}

// ---------------------------------------------------------------------------
// Dynamic obstacles

enum class ObstacleMode { linear, arc, swerve };

struct ObstacleParams {
  int count = 300;
  double arena_radius = 50.0;
  double obstacle_radius = 0.5;
  double t_resample = 2.0;
  double arc_radius = 5.0;
  double swerve_rate = std::numbers::pi / 3.0;
  double spawn_clearance = 2.0;
  Vector start = Vector{{25.0, 0.0}};
  Vector goal = Vector{{-25.0, 0.0}};
  std::vector<double> static_points;  // flattened (x, y) pairs; non-empty means a frozen world
};

struct Obstacle {
  Eigen::Vector2d p;
  double heading = 0.0;
  ObstacleMode mode = ObstacleMode::linear;
  double speed = 0.0;    // linear, swerve
  double omega = 0.0;    // arc
  double phi_max = 0.0;  // swerve amplitude |phi_invert|
  double phi = 0.0;      // swerve offset from base heading
  double phi_dir = 1.0;
};

inline constexpr std::array<double, 4> kObstacleSpeeds{0.1, 0.2, 0.5, 0.7};
inline constexpr std::array<double, 4> kObstacleOmegas{0.039, 0.058, 0.088, 0.117};
inline constexpr std::array<double, 4> kObstacleWeights{0.4, 0.1, 0.2, 0.3};

// Redraw the mode and its parameters.
inline void resample_obstacle(Obstacle& o, Rng& rng) {
  std::discrete_distribution<int> pick(kObstacleWeights.begin(), kObstacleWeights.end());
  std::uniform_int_distribution<int> mode(0, 2);
  std::uniform_real_distribution<double> phi(-std::numbers::pi / 2, std::numbers::pi / 2);
  o.mode = static_cast<ObstacleMode>(mode(rng));
  o.speed = kObstacleSpeeds[pick(rng)];
  o.omega = kObstacleOmegas[pick(rng)];
  o.phi_max = std::abs(phi(rng));
  o.phi = 0.0;
  o.phi_dir = 1.0;
}

inline double obstacle_speed(const Obstacle& o, double arc_radius) {
  return o.mode == ObstacleMode::arc ? o.omega * arc_radius : o.speed;
}

class ObstacleWorld final : public World {
 public:
  ObstacleWorld(ObstacleParams p) : p_(std::move(p)) {
    if (p_.static_points.size() % 2) throw DimensionError("static obstacle list needs (x, y) pairs");
    if (!p_.static_points.empty()) place_static();
  }

  std::unique_ptr<World> clone() const override { return std::make_unique<ObstacleWorld>(*this); }

  void reset(Rng& rng) override {
    t_ = 0.0;
    next_resample_ = p_.t_resample;
    if (!p_.static_points.empty()) return place_static();
    obstacles_.assign(p_.count, {});
    std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
    for (Obstacle& o : obstacles_) {
      do {
        Vector q = detail::uniform_in_disk(rng, p_.arena_radius);
        o.p = {q[0], q[1]};
      } while ((o.p - Eigen::Vector2d(p_.start[0], p_.start[1])).norm() < p_.spawn_clearance ||
               (o.p - Eigen::Vector2d(p_.goal[0], p_.goal[1])).norm() < p_.spawn_clearance);
      o.heading = heading(rng);
      resample_obstacle(o, rng);
    }
    sync();
  }

  void observe(References& refs) const override { refs.point_sets["obstacles"] = points_; }

  void advance(double dt, Rng& rng) override {
    t_ += dt;
    if (p_.static_points.empty()) {
      for (Obstacle& o : obstacles_) step_obstacle(o, dt);
      if (t_ + 1e-9 >= next_resample_) {
        for (Obstacle& o : obstacles_) resample_obstacle(o, rng);
        next_resample_ += p_.t_resample;
      }
    }
    sync();
  }

  bool collides(const State& s) const override {
    const double r2 = p_.obstacle_radius * p_.obstacle_radius;
    for (const Obstacle& o : obstacles_)
      if ((o.p - Eigen::Vector2d(s[0], s[1])).squaredNorm() < r2) return true;
    return false;
  }

  // One obstacle's motion over dt, followed by the antipodal wrap.
  void step_obstacle(Obstacle& o, double dt) const {
    switch (o.mode) {
      case ObstacleMode::linear:
        o.p += o.speed * dt * Eigen::Vector2d(std::cos(o.heading), std::sin(o.heading));
        break;
      case ObstacleMode::arc: {
        // Exact motion along a counter-clockwise circle.
        const double h1 = o.heading + o.omega * dt;
        o.p += p_.arc_radius * Eigen::Vector2d(std::sin(h1) - std::sin(o.heading), std::cos(o.heading) - std::cos(h1));
        o.heading = h1;
        break;
      }
      case ObstacleMode::swerve: {
        double dphi = o.phi_dir * p_.swerve_rate * dt;
        if (std::abs(o.phi + dphi) > o.phi_max) {
          o.phi_dir = -o.phi_dir;
          dphi = std::clamp(o.phi + dphi, -o.phi_max, o.phi_max) - o.phi;
        }
        o.phi += dphi;
        o.heading += dphi;
        o.p += o.speed * dt * Eigen::Vector2d(std::cos(o.heading), std::sin(o.heading));
        break;
      }
    }
    const double r = o.p.norm();
    if (r > p_.arena_radius) o.p *= -p_.arena_radius / r;
  }

  std::vector<Obstacle>& obstacles() { return obstacles_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const ObstacleParams& params() const { return p_; }
  void sync() {
    points_.resize(static_cast<Eigen::Index>(obstacles_.size()), 2);
    for (std::size_t i = 0; i < obstacles_.size(); ++i) points_.row(static_cast<Eigen::Index>(i)) = obstacles_[i].p.transpose();
  }

 private:
  void place_static() {
    obstacles_.clear();
    for (std::size_t i = 0; i < p_.static_points.size(); i += 2) {
      Obstacle o;
      o.p = {p_.static_points[i], p_.static_points[i + 1]};
      obstacles_.push_back(o);
    }
    sync();
  }

  ObstacleParams p_;
  double t_ = 0.0, next_resample_ = 0.0;
  std::vector<Obstacle> obstacles_;
  PointSet points_;
};

// Advance every obstacle of a world by one step.
inline void obstacle_step(ObstacleWorld& world, double dt, Rng& rng) { world.advance(dt, rng); }

// Velocity command along -grad U with U(x) = alpha |x - g|^2 + sum exp(-|x - o|^2 / (2 sigma^2)),
// capped at the speed limit and tracked with a one-step acceleration.
inline Action gaussian_apf_policy(const State& s, const Vector& goal, const PointSet& obstacles, double alpha,
                                  double sigma, double speed_limit, double accel, double dt) {
  const Eigen::Vector2d x(s[0], s[1]), v(s[2], s[3]), g(goal[0], goal[1]);
  Eigen::Vector2d grad = 2.0 * alpha * (x - g);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Eigen::Index i = 0; i < obstacles.rows(); ++i) {
    const Eigen::Vector2d d = x - Eigen::Vector2d(obstacles(i, 0), obstacles(i, 1));
    grad += -2.0 * inv * std::exp(-d.squaredNorm() * inv) * d;
  }
  Eigen::Vector2d vdes = -grad;
  if (vdes.norm() > speed_limit) vdes *= speed_limit / vdes.norm();
  const Eigen::Vector2d a = ((vdes - v) / dt).cwiseMax(-accel).cwiseMin(accel);
  return Vector{{a[0], a[1]}};
}

inline Task make_obstacle_task(const Parameters& P = {}) {
  P.check_known("obstacles", {"obstacles", "t_resample", "arena_radius", "obstacle_radius", "speed_limit", "accel", "dt",
                              "horizon", "start", "goal", "beta", "apf_sigma", "spawn_clearance", "goal_tolerance",
                              "static_obstacles"});
  ObstacleParams op;
  op.count = P.integer("obstacles", 300);
  op.t_resample = P.number("t_resample", 2.0);
  op.arena_radius = P.number("arena_radius", 50.0);
  op.obstacle_radius = P.number("obstacle_radius", 0.5);
  op.spawn_clearance = P.number("spawn_clearance", 2.0);
  op.static_points = P.list("static_obstacles", {});
  auto start = P.list("start", {25.0, 0.0}), goal = P.list("goal", {-25.0, 0.0});
  if (start.size() != 2 || goal.size() != 2) throw DimensionError("start and goal need 2 entries");
  op.start = Vector{{start[0], start[1]}};
  op.goal = Vector{{goal[0], goal[1]}};
  if (op.count < 0) throw DimensionError("obstacle count must be non-negative");
  if (!(op.t_resample > 0.0)) throw DimensionError("t_resample must be positive");
  const double dt = P.number("dt", 0.1), accel = P.number("accel", 3.0), vmax = P.number("speed_limit", 0.37);
  const double sigma = P.number("apf_sigma", 0.45);

  Task task;
  task.name = "obstacles";
  task.layout = StateLayout({{"robot", 2}});
  auto dyn = std::make_shared<BlockLinearDynamics>(2, 2, dt);
  dyn->add_double_integrator(0, 2, 0);
  dyn->add_double_integrator(1, 3, 1);
  dyn->validate();
  task.dynamics = dyn;
  Preference f1 = detail::point_pref("goal_distance", Space::position, {0, 1}, "robot", goal);
  Preference f2 = detail::make_pref("obstacle_clearance", PreferenceKind::repeller, Space::position, {0, 1}, {"robot"},
                                    TargetKind::nearest);
  f2.reference = "obstacles";
  f2.beta = P.number("beta", 0.01);
  task.preferences = {f1, f2};
  task.accel_limit = Vector::Constant(2, accel);
  task.speed_limit = vmax;
  task.speed_coords = {2, 3};
  task.goal.tolerance = P.number("goal_tolerance", 0.5);
  task.horizon = P.number("horizon", 300.0);
  task.published_theta = Vector{{-0.23, -0.1696}};
  task.world = std::make_shared<ObstacleWorld>(op);
  const Vector s0{{start[0], start[1], 0.0, 0.0}};
  task.sample_initial = [s0](Rng&) { return s0; };
  const Vector g = op.goal;
  task.metric = [g](const State& s, const References&) { return (s.head<2>() - g).norm(); };
  task.metric_name = "goal_distance";
  task.apf = [g, sigma, vmax, accel, dt](const Task&, const State& s, const References& r, const PolicyConfig& c) {
    return gaussian_apf_policy(s, g, r.point_set("obstacles"), c.apf_alpha, sigma, vmax, accel, dt);
  };
  task.finalize();
  return task;
}

// ---------------------------------------------------------------------------
// Aerial cargo delivery: quadrotor (3) + suspended load swing (2).

inline Task make_cargo_task(const Parameters& P = {}) {
  P.check_known("cargo", {"cable_length", "gravity", "accel", "dt", "horizon", "goal", "start_radius", "goal_tolerance",
                          "max_swing"});
  const double L = P.number("cable_length", 0.62), g = P.number("gravity", kGravity), dt = P.number("dt", 0.02);
  const double accel = P.number("accel", 3.0), radius = P.number("start_radius", 5.0);
  const double max_swing = P.number("max_swing", std::numbers::pi / 2);
  auto goal = P.list("goal", {0.5, 0.5, 1.2});
  if (goal.size() != 3) throw DimensionError("cargo goal needs 3 entries");
  if (!(L > 0.0)) throw DimensionError("cable_length must be positive");

  Task task;
  task.name = "cargo";
  task.layout = StateLayout({{"quad", 3}, {"load", 2}});
  // positions: quad 0..2, load 3..4; velocities: quad 5..7, load 8..9
  auto dyn = std::make_shared<BlockLinearDynamics>(5, 3, dt);
  detail::add_swing_axis(*dyn, {0, 3, 5, 8}, 0, g, L, false);
  detail::add_swing_axis(*dyn, {1, 4, 6, 9}, 1, g, L, false);
  dyn->add_double_integrator(2, 7, 2);
  dyn->validate();
  task.dynamics = dyn;
  task.preferences = {
      detail::point_pref("quad_position", Space::position, {0, 1, 2}, "quad", goal),
      detail::point_pref("load_swing", Space::position, {0, 1}, "load", {0.0, 0.0}),
      detail::point_pref("quad_velocity", Space::velocity, {0, 1, 2}, "quad", {0.0, 0.0, 0.0}),
      detail::point_pref("load_swing_rate", Space::velocity, {0, 1}, "load", {0.0, 0.0}),
  };
  task.accel_limit = Vector::Constant(3, accel);
  task.goal.preferences = {0};
  task.goal.tolerance = P.number("goal_tolerance", 0.05);
  task.horizon = P.number("horizon", 15.0);
  task.published_theta = Vector{{-86290.0, -350350.0, -1430.0, -1160.0}};
  const Vector gv = Eigen::Map<const Vector>(goal.data(), 3);
  task.sample_initial = [gv, radius](Rng& rng) {
    State s = State::Zero(10);
    s.head<3>() = gv + detail::uniform_in_ball(rng, radius);
    return s;
  };
  task.metric = [gv](const State& s, const References&) { return (s.head<3>() - gv).norm(); };
  task.metric_name = "goal_distance";
  task.check_state = [max_swing](const State& s) -> std::string {
    if (std::abs(s[3]) > max_swing || std::abs(s[4]) > max_swing) return "load swing beyond model range";
    return "";
  };
  task.finalize();
  return task;
}

// ---------------------------------------------------------------------------
// Rendezvous: quadrotor with load (3 + 2) and a ground robot (3, z unactuated).

inline Task make_rendezvous_task(const Parameters& P = {}) {
  P.check_known("rendezvous", {"cable_length", "gravity", "accel_quad", "accel_ground", "dt", "horizon", "height_offset",
                               "start_distance", "goal_tolerance", "max_swing"});
  const double L = P.number("cable_length", 0.62), g = P.number("gravity", kGravity), dt = P.number("dt", 0.02);
  const double aq = P.number("accel_quad", 3.0), ag = P.number("accel_ground", 2.0);
  const double offset = P.number("height_offset", 0.6), dist = P.number("start_distance", 10.0);
  const double max_swing = P.number("max_swing", std::numbers::pi / 2);

  Task task;
  task.name = "rendezvous";
  task.layout = StateLayout({{"quad", 3}, {"ground", 3}, {"load", 2}});
  // positions: quad 0..2, ground 3..5, load 6..7; velocities at +8
  auto dyn = std::make_shared<BlockLinearDynamics>(8, 5, dt);
  detail::add_swing_axis(*dyn, {0, 6, 8, 14}, 0, g, L, false);
  detail::add_swing_axis(*dyn, {1, 7, 9, 15}, 1, g, L, false);
  dyn->add_double_integrator(2, 10, 2);
  dyn->add_double_integrator(3, 11, 3);
  dyn->add_double_integrator(4, 12, 4);
  dyn->add_double_integrator(5, 13, -1);
  dyn->validate();
  task.dynamics = dyn;
  task.preferences = {
      detail::relation_pref("horizontal_gap", Space::position, {0, 1}, "quad", "ground", {0.0, 0.0}),
      detail::relation_pref("height_gap", Space::position, {2}, "quad", "ground", {offset}),
      detail::relation_pref("relative_velocity", Space::velocity, {0, 1, 2}, "quad", "ground", {0.0, 0.0, 0.0}),
      detail::point_pref("load_swing", Space::position, {0, 1}, "load", {0.0, 0.0}),
      detail::point_pref("load_swing_rate", Space::velocity, {0, 1}, "load", {0.0, 0.0}),
  };
  task.accel_limit = Vector{{aq, aq, aq, ag, ag}};
  task.goal.tolerance = P.number("goal_tolerance", 0.05);
  task.horizon = P.number("horizon", 15.0);
  task.published_theta = Vector{{-92256.0, -44767.0, -866.0, -336.0, -107.0}};
  task.sample_initial = [dist, offset](Rng& rng) {
    State s = State::Zero(16);
    std::uniform_real_distribution<double> z(offset, 2.0);
    const double h = z(rng);
    // Horizontal offset chosen so the 3-D distance stays within `dist`.
    const Vector xy = detail::uniform_in_disk(rng, std::sqrt(std::max(0.0, dist * dist - h * h)));
    s.head<2>() = xy;
    s[2] = h;
    return s;
  };
  task.metric = [L](const State& s, const References&) {
    const Eigen::Vector2d load = s.head<2>() + L * s.segment<2>(6);
    return (load - s.segment<2>(3)).norm();
  };
  task.metric_name = "load_ground_separation";
  task.check_state = [max_swing](const State& s) -> std::string {
    if (std::abs(s[6]) > max_swing || std::abs(s[7]) > max_swing) return "load swing beyond model range";
    return "";
  };
  task.finalize();
  return task;
}

// ---------------------------------------------------------------------------
// Flying inverted pendulum: quadrotor (3, z unactuated) + pole tip offset (2).

inline Task make_pendulum_task(const Parameters& P = {}) {
  P.check_known("pendulum", {"pole_length", "gravity", "accel", "dt", "horizon", "initial_angle_deg", "switch_time",
                             "goal_fraction"});
  const double L = P.number("pole_length", 1.0), g = P.number("gravity", kGravity), dt = P.number("dt", 0.02);
  const double accel = P.number("accel", 5.0), angle = P.number("initial_angle_deg", 23.0);
  const double t_switch = P.number("switch_time", 5.0);
  if (!(L > 0.0)) throw DimensionError("pole_length must be positive");

  Task task;
  task.name = "pendulum";
  task.layout = StateLayout({{"quad", 3}, {"pole", 2}});
  // positions: quad 0..2, pole 3..4; velocities: quad 5..7, pole 8..9
  auto dyn = std::make_shared<BlockLinearDynamics>(5, 2, dt);
  detail::add_swing_axis(*dyn, {0, 3, 5, 8}, 0, g, L, true);
  detail::add_swing_axis(*dyn, {1, 4, 6, 9}, 1, g, L, true);
  dyn->add_double_integrator(2, 7, -1);
  dyn->validate();
  task.dynamics = dyn;
  task.preferences = {
      detail::point_pref("pole_position", Space::position, {0, 1}, "pole", {0.0, 0.0}),
      detail::point_pref("pole_velocity", Space::velocity, {0, 1}, "pole", {0.0, 0.0}),
      detail::point_pref("quad_position", Space::position, {0, 1, 2}, "quad", {0.0, 0.0, 0.0}),
      detail::point_pref("quad_velocity", Space::velocity, {0, 1, 2}, "quad", {0.0, 0.0, 0.0}),
      detail::point_pref("pole_velocity_slowdown", Space::velocity, {0, 1}, "pole", {0.0, 0.0}),
  };
  task.phases = {{0.0, {0, 1}}, {t_switch, {2, 3, 4}}};
  task.accel_limit = Vector::Constant(2, accel);
  task.goal.preferences = {0};
  task.goal.tolerance = P.number("goal_fraction", 0.05) * L;
  task.horizon = P.number("horizon", 10.0);
  task.published_theta = Vector{{-86.6809, -0.3345, -1.6692e6, -0.0069e6, 0.0007e6}};
  const double xp = L * std::sin(angle * std::numbers::pi / 180.0);
  task.sample_initial = [xp](Rng&) {
    State s = State::Zero(10);
    s[3] = xp;
    return s;
  };
  task.metric = [](const State& s, const References&) { return s.segment<2>(3).norm(); };
  task.metric_name = "pole_offset";
  task.check_state = [L](const State& s) -> std::string {
    if (s.segment<2>(3).norm() > L) return "pole fell beyond model range";
    return "";
  };
  task.finalize();
  return task;
}

// ---------------------------------------------------------------------------
// Point mass in `dims` dimensions with position and velocity attractors at the origin.

inline Task make_double_integrator_task(const Parameters& P = {}) {
  P.check_known("double-integrator", {"dims", "accel", "dt", "horizon", "goal_tolerance", "start_radius"});
  const int n = P.integer("dims", 1);
  const double dt = P.number("dt", 0.02), accel = P.number("accel", 3.0), radius = P.number("start_radius", 1.0);
  if (n < 1) throw DimensionError("dims must be positive");
  Task task;
  task.name = "double-integrator";
  task.layout = StateLayout({{"point", n}});
  auto dyn = std::make_shared<BlockLinearDynamics>(n, n, dt);
  for (int k = 0; k < n; ++k) dyn->add_double_integrator(k, n + k, k);
  dyn->validate();
  task.dynamics = dyn;
  std::vector<int> axes(n);
  for (int k = 0; k < n; ++k) axes[k] = k;
  task.preferences = {detail::point_pref("position", Space::position, axes, "point", std::vector<double>(n, 0.0)),
                      detail::point_pref("velocity", Space::velocity, axes, "point", std::vector<double>(n, 0.0))};
  task.accel_limit = Vector::Constant(n, accel);
  task.goal.tolerance = P.number("goal_tolerance", 0.05);
  task.horizon = P.number("horizon", 10.0);
  task.published_theta = Vector{{-1.0, -1.0}};
  task.sample_initial = [n, radius](Rng& rng) {
    std::uniform_real_distribution<double> u(-radius, radius);
    State s = State::Zero(2 * n);
    for (int k = 0; k < n; ++k) s[k] = u(rng);
    return s;
  };
  task.metric = [n](const State& s, const References&) { return s.head(n).norm(); };
  task.metric_name = "origin_distance";
  task.finalize();
  return task;
}

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"pursuit", "obstacles", "cargo", "rendezvous", "pendulum", "double-integrator"};
  return names;
}

inline Task make_task(const std::string& name, const Parameters& P = {}) {
  if (name == "pursuit") return make_pursuit_task(P);
  if (name == "obstacles") return make_obstacle_task(P);
  if (name == "cargo") return make_cargo_task(P);
  if (name == "rendezvous") return make_rendezvous_task(P);
  if (name == "pendulum") return make_pendulum_task(P);
  if (name == "double-integrator") return make_double_integrator_task(P);
  throw DimensionError("unknown task '" + name + "'");
}

}  // namespace pearl
