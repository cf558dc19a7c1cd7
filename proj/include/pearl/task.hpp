#pragma once
// Task description and the closed-loop trajectory planner.

#include "pearl/core.hpp"
#include "pearl/features.hpp"
#include "pearl/policies.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pearl {

// Exogenous part of an environment (prey, obstacles). The planner only sees
// what observe() publishes for the current instant.
class World {
 public:
  virtual ~World() = default;
  virtual std::unique_ptr<World> clone() const = 0;
  virtual void reset(Rng& rng) = 0;
  virtual void observe(References& refs) const = 0;
  virtual void advance(double dt, Rng& rng) = 0;
  virtual bool collides(const State&) const { return false; }
};

// Preference subset active from `start` seconds on.
struct TaskPhase {
  double start = 0.0;
  std::vector<int> preferences;
};

// Goal region: every listed attractor feature below tolerance^2.
struct GoalSpec {
  std::vector<int> preferences;
  double tolerance = 0.05;
};

using ParamValue = std::variant<double, std::vector<double>, std::string>;

// Task-specific overrides keyed by name.
class Parameters {
 public:
  std::map<std::string, ParamValue> values;

  bool operator==(const Parameters&) const = default;
  bool has(const std::string& k) const { return values.count(k) > 0; }

  double number(const std::string& k, double fallback) const {
    auto it = values.find(k);
    if (it == values.end()) return fallback;
    if (auto d = std::get_if<double>(&it->second)) return *d;
    throw DimensionError("parameter '" + k + "' must be a number");
  }
  int integer(const std::string& k, int fallback) const {
    double d = number(k, fallback);
    if (d != std::floor(d)) throw DimensionError("parameter '" + k + "' must be an integer");
    return static_cast<int>(d);
  }
  std::vector<double> list(const std::string& k, std::vector<double> fallback) const {
    auto it = values.find(k);
    if (it == values.end()) return fallback;
    if (auto v = std::get_if<std::vector<double>>(&it->second)) return *v;
    throw DimensionError("parameter '" + k + "' must be a list of numbers");
  }
  std::string text(const std::string& k, std::string fallback) const {
    auto it = values.find(k);
    if (it == values.end()) return fallback;
    if (auto s = std::get_if<std::string>(&it->second)) return *s;
    throw DimensionError("parameter '" + k + "' must be a string");
  }
  void check_known(const std::string& task, const std::vector<std::string>& known) const {
    for (const auto& [k, v] : values)
      if (std::find(known.begin(), known.end(), k) == known.end())
        throw DimensionError("unknown parameter '" + k + "' for task " + task);
  }
};

struct Task;
using BaselinePolicy = std::function<Action(const Task&, const State&, const References&, const PolicyConfig&)>;

struct Task {
  std::string name;
  StateLayout layout;
  std::shared_ptr<const ControlAffineDynamics> dynamics;
  std::vector<Preference> preferences;
  std::vector<TaskPhase> phases;  // empty: all preferences, always
  Vector accel_limit;
  std::optional<double> speed_limit;
  std::vector<int> speed_coords;  // velocity coordinates bound by speed_limit (pairs per body)
  GoalSpec goal;
  double horizon = 20.0;
  Vector published_theta;
  std::shared_ptr<const World> world;
  std::function<State(Rng&)> sample_initial;
  std::function<double(const State&, const References&)> metric;
  std::string metric_name = "metric";
  // Non-empty message when a state leaves the model's validity region.
  std::function<std::string(const State&)> check_state;
  BaselinePolicy boids, apf;

  double dt() const { return dynamics->dt(); }
  int action_dim() const { return dynamics->action_dim(); }
  int size() const { return static_cast<int>(preferences.size()); }

  // Compile the per-phase and goal models. Call after editing any field above.
  void finalize() {
    if (!dynamics) throw DimensionError("task '" + name + "' has no dynamics");
    if (dynamics->state_dim() != layout.state_dim()) throw DimensionError("task '" + name + "': layout and dynamics disagree");
    if (accel_limit.size() != dynamics->action_dim()) throw DimensionError("task '" + name + "': accel_limit length");
    if ((accel_limit.array() <= 0.0).any()) throw DimensionError("task '" + name + "': accel limits must be positive");
    if (preferences.empty()) throw DimensionError("task '" + name + "' has no preferences");
    full_ = FeatureModel(layout, preferences);
    phase_models_.clear();
    if (phases.empty()) {
      std::vector<int> all(preferences.size());
      for (int i = 0; i < size(); ++i) all[i] = i;
      phases.push_back({0.0, all});
    }
    if (phases.front().start != 0.0) throw DimensionError("first phase must start at t = 0");
    for (std::size_t k = 0; k < phases.size(); ++k) {
      if (k > 0 && !(phases[k].start > phases[k - 1].start)) throw DimensionError("phase start times must increase");
      for (int i : phases[k].preferences)
        if (i < 0 || i >= size()) throw DimensionError("phase refers to preference " + std::to_string(i));
      phase_models_.push_back(full_.subset(phases[k].preferences));
    }
    if (goal.preferences.empty()) goal.preferences = full_.attractor_indices();
    for (int i : goal.preferences) {
      if (i < 0 || i >= size()) throw DimensionError("goal refers to preference " + std::to_string(i));
      if (preferences[i].kind != PreferenceKind::attractor) throw DimensionError("goal preferences must be attractors");
    }
    if (!(goal.tolerance >= 0.0)) throw DimensionError("goal tolerance must be non-negative");
    goal_model_ = full_.subset(goal.preferences);
  }

  const FeatureModel& model() const { return full_; }
  int phase_at(double t) const {
    int k = 0;
    while (k + 1 < static_cast<int>(phases.size()) && t + 1e-9 >= phases[k + 1].start) ++k;
    return k;
  }
  const FeatureModel& phase_model(int k) const { return phase_models_.at(k); }
  Vector phase_theta(int k, const Vector& theta) const {
    Vector out(phases.at(k).preferences.size());
    for (std::size_t i = 0; i < phases[k].preferences.size(); ++i) out[i] = theta[phases[k].preferences[i]];
    return out;
  }

  // Strict inequality: a zero tolerance admits no state.
  bool in_goal(const State& s, const References& refs) const {
    const Vector F = goal_model_.features(s, refs);
    return (F.array() < goal.tolerance * goal.tolerance).all();
  }

  // Square root of the largest goal feature: the distance the tolerance is compared with.
  double goal_distance(const State& s, const References& refs) const {
    return std::sqrt(goal_model_.features(s, refs).maxCoeff());
  }

  References initial_refs() const {
    References refs;
    if (world) world->observe(refs);
    return refs;
  }

  // Acceleration box, tightened so each speed-limited velocity stays within the
  // limit after one step.
  ActionBox action_box(const State& s) const {
    ActionBox box = ActionBox::symmetric(accel_limit);
    if (!speed_limit) return box;
    for (int i = 0; i < action_dim(); ++i) {
      for (const SparseEntry& e : dynamics->input_column(s, i)) {
        if (std::find(speed_coords.begin(), speed_coords.end(), e.index) == speed_coords.end() || e.value <= 0.0) continue;
        const double lv = (-*speed_limit - s[e.index]) / e.value, hv = (*speed_limit - s[e.index]) / e.value;
        double lo = std::max(box.lower[i], lv), hi = std::min(box.upper[i], hv);
        if (lo > hi) lo = hi = hv < box.lower[i] ? box.lower[i] : box.upper[i];
        box.lower[i] = lo;
        box.upper[i] = hi;
      }
    }
    return box;
  }

  // Final projection of a command: accel box, then each body's speed onto the
  // speed-limit disc.
  Action limit_action(const State& s, Action a) const {
    a = ActionBox::symmetric(accel_limit).clamp(a);
    if (!speed_limit || speed_coords.empty()) return a;
    State next = pearl::step(*dynamics, s, a);
    for (std::size_t k = 0; k + 1 < speed_coords.size(); k += 2) {
      const int cx = speed_coords[k], cy = speed_coords[k + 1];
      const double speed = std::hypot(next[cx], next[cy]);
      if (speed <= *speed_limit) continue;
      const double scale = *speed_limit / speed;
      for (int c : {cx, cy}) {
        for (int i = 0; i < action_dim(); ++i)
          for (const SparseEntry& e : dynamics->input_column(s, i))
            if (e.index == c && e.value > 0.0) a[i] += (next[c] * scale - next[c]) / e.value;
      }
    }
    return ActionBox::symmetric(accel_limit).clamp(a);
  }

 private:
  FeatureModel full_, goal_model_;
  std::vector<FeatureModel> phase_models_;
};

enum class TrajectoryStatus { goal_reached, horizon_exhausted, collision, truncated, numeric_failure };

inline std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::goal_reached: return "goal reached";
    case TrajectoryStatus::horizon_exhausted: return "horizon exhausted";
    case TrajectoryStatus::collision: return "collision";
    case TrajectoryStatus::truncated: return "truncated";
    case TrajectoryStatus::numeric_failure: return "numeric failure";
  }
  return "?";
}

struct TrajectoryStep {
  double t;
  State s;
  Action a;
  double value;
  double plan_ms;
  Action xi;
  double metric;
  bool in_goal;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  State final_state;
  double final_time = 0.0;
  double final_metric = 0.0;
  double final_goal_distance = std::numeric_limits<double>::quiet_NaN();
  bool final_in_goal = false;
  TrajectoryStatus status = TrajectoryStatus::horizon_exhausted;
  std::string diagnostic;

  bool success() const { return status == TrajectoryStatus::goal_reached; }
  double mean_plan_ms() const {
    if (steps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& st : steps) acc += st.plan_ms;
    return acc / steps.size();
  }
  // Mean metric over the trailing `window` seconds, including the final state.
  double trailing_metric(double window) const {
    double acc = final_metric;
    int n = 1;
    for (auto it = steps.rbegin(); it != steps.rend() && final_time - it->t <= window + 1e-9; ++it) {
      acc += it->metric;
      ++n;
    }
    return acc / n;
  }
  // Steps spent in the goal region.
  int reward() const {
    int r = 0;
    for (const auto& st : steps) r += st.in_goal;
    return r;
  }
};

struct PlanOptions {
  PolicyConfig policy;
  GaussianDisturbance plant;        // true disturbance; empty means none
  std::optional<GaussianDisturbance> planner;  // planner's belief; default: the plant's
  bool estimate_disturbance = false;
  int estimator_window = 100;
  bool stop_at_goal = true;
  std::uint64_t seed = 0;
};

// Closed-loop rollout. The world is reset from the seed, so a (task, s0, seed)
// triple fixes the trajectory apart from timing columns.
inline Trajectory plan_trajectory(const Task& task, const State& s0, const Vector& theta, double horizon,
                                  const PlanOptions& opt) {
  if (!(horizon >= 0.0)) throw DimensionError("horizon must be non-negative");
  task.model().check_state(s0);
  task.model().check_theta(theta);
  opt.policy.validate();
  const int da = task.action_dim();
  const GaussianDisturbance plant = opt.plant.dim() == 0 ? GaussianDisturbance::none(da) : opt.plant;
  plant.validate();
  if (plant.dim() != da) throw DimensionError("plant disturbance does not match action dimension");
  GaussianDisturbance belief = opt.planner.value_or(plant);
  belief.validate();
  if (belief.dim() != da) throw DimensionError("planner disturbance does not match action dimension");

  Rng world_rng(derive_seed(opt.seed, 0)), plan_rng(derive_seed(opt.seed, 1)), plant_rng(derive_seed(opt.seed, 2));
  std::unique_ptr<World> world = task.world ? task.world->clone() : nullptr;
  if (world) world->reset(world_rng);
  DisturbanceEstimator estimator(static_cast<std::size_t>(opt.estimator_window));

  const double dt = task.dt();
  const long n_steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
  Trajectory traj;
  State s = s0;
  References refs;
  auto observe = [&] {
    refs = References{};
    if (world) world->observe(refs);
  };
  double t = 0.0;
  long k = 0;
  bool done = false;
  for (; k < n_steps; ++k) {
    t = k * dt;
    observe();
    const bool goal = task.in_goal(s, refs);
    if (goal && opt.stop_at_goal) {
      traj.status = TrajectoryStatus::goal_reached;
      done = true;
      break;
    }
    const int phase = task.phase_at(t);
    const FeatureModel& model = task.phase_model(phase);
    const Vector th = task.phase_theta(phase, theta);

    const auto t0 = std::chrono::steady_clock::now();
    Action a;
    GreedyProblem problem{*task.dynamics, model, th, refs, task.action_box(s)};
    GaussianDisturbance est = belief;
    if (opt.estimate_disturbance) est = estimator.size() >= 2 ? estimator.estimate() : GaussianDisturbance::none(da);
    switch (opt.policy.method) {
      case PolicyMethod::das: a = das(problem, s); break;
      case PolicyMethod::lsapa: a = lsapa(problem, s, est, opt.policy.samples_per_axis, plan_rng); break;
      case PolicyMethod::hoot_grid: a = hoot(problem, s, opt.policy, &est, plan_rng); break;
      case PolicyMethod::boids:
        if (!task.boids) throw DimensionError("task '" + task.name + "' has no boids baseline");
        a = task.boids(task, s, refs, opt.policy);
        break;
      case PolicyMethod::apf:
        if (!task.apf) throw DimensionError("task '" + task.name + "' has no apf baseline");
        a = task.apf(task, s, refs, opt.policy);
        break;
    }
    a = task.limit_action(s, a);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const Action xi = sample_disturbance(plant, plant_rng);
    traj.steps.push_back({t, s, a, model.value(s, th, refs), ms, xi, task.metric ? task.metric(s, refs) : 0.0, goal});
    State next = step_disturbed(*task.dynamics, s, a, xi);
    estimator.push(a, a + xi);
    const bool finite = next.allFinite();
    std::string invalid = finite ? (task.check_state ? task.check_state(next) : "") : "state became non-finite";
    if (!invalid.empty()) {
      traj.status = finite ? TrajectoryStatus::truncated : TrajectoryStatus::numeric_failure;
      traj.diagnostic = invalid + " at t = " + std::to_string(t + dt);
      done = true;
      ++k;
      break;
    }
    s = std::move(next);
    if (world) world->advance(dt, world_rng);
    if (world && world->collides(s)) {
      traj.status = TrajectoryStatus::collision;
      traj.diagnostic = "collision at t = " + std::to_string(t + dt);
      done = true;
      ++k;
      break;
    }
  }
  traj.final_time = k * dt;
  observe();
  traj.final_state = s;
  traj.final_in_goal = s.allFinite() && task.in_goal(s, refs);
  if (s.allFinite()) traj.final_goal_distance = task.goal_distance(s, refs);
  traj.final_metric = task.metric && s.allFinite() ? task.metric(s, refs) : 0.0;
  if (!done) traj.status = traj.final_in_goal && opt.stop_at_goal ? TrajectoryStatus::goal_reached : TrajectoryStatus::horizon_exhausted;
  return traj;
}

}  // namespace pearl
