#pragma once
// Timing suites: per-step planning cost against problem size and policy.

#include "pearl/config.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace pearl {

struct BenchRow {
  std::string label;   // what varied: policy name or task
  double x = 0.0;      // size variable (agents, coordinates, obstacles); 0 when not a sweep
  double ms_per_step = 0.0;  // median over the run
  int steps = 0;
};

struct BenchResult {
  std::string suite;
  std::vector<BenchRow> rows;
  std::optional<PowerFit> power;   // ms_per_step ~ x^k
  std::optional<LinearFit> linear;
};

inline const std::vector<std::string>& bench_suites() {
  static const std::vector<std::string> s{"pursuit-scaling", "policy-timing", "feature-scaling", "obstacle-scaling"};
  return s;
}

namespace detail {

// Median planning time per step: a few preempted steps do not move it.
inline double step_ms(const Task& task, const Vector& theta, int steps, const PlanOptions& opt, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 7));
  const State s0 = task.sample_initial(rng);
  PlanOptions o = opt;
  o.stop_at_goal = false;
  o.seed = seed;
  const Trajectory tr = plan_trajectory(task, s0, theta, steps * task.dt(), o);
  if (tr.steps.empty()) throw NumericError("benchmark trajectory ended before its first step: " + tr.diagnostic);
  std::vector<double> ms;
  for (const auto& st : tr.steps) ms.push_back(st.plan_ms);
  const auto mid = ms.begin() + ms.size() / 2;
  std::nth_element(ms.begin(), mid, ms.end());
  return *mid;
}

inline void fit_rows(BenchResult& r) {
  std::vector<double> x, y;
  for (const auto& row : r.rows) x.push_back(row.x), y.push_back(row.ms_per_step);
  r.power = fit_power_law(x, y);
  r.linear = fit_linear(x, y);
}

}  // namespace detail

// DAS on the pursuit task with a growing team.
inline BenchResult bench_pursuit_scaling(const std::vector<int>& agents = {5, 10, 15, 20, 25}, int steps = 100,
                                         std::uint64_t seed = 1) {
  BenchResult r{"pursuit-scaling", {}, {}, {}};
  for (int n : agents) {
    Parameters P;
    P.values["agents"] = static_cast<double>(n);
    const Task task = make_pursuit_task(P);
    const double ms = detail::step_ms(task, task.published_theta, steps, {}, seed);
    r.rows.push_back({"das", static_cast<double>(n), ms, steps});
  }
  detail::fit_rows(r);
  return r;
}

// Per-step cost of each policy on one task under its disturbance.
inline BenchResult bench_policy_timing(const std::string& task_name = "rendezvous", int steps = 50, std::uint64_t seed = 1,
                                       double mean = 1.0, double stddev = 1.0) {
  BenchResult r{"policy-timing", {}, {}, {}};
  const Task task = make_task(task_name);
  for (PolicyMethod m : {PolicyMethod::das, PolicyMethod::lsapa, PolicyMethod::hoot_grid}) {
    PlanOptions opt;
    opt.policy.method = m;
    opt.plant = GaussianDisturbance::iid(task.action_dim(), mean, stddev);
    const double ms = detail::step_ms(task, task.published_theta, steps, opt, seed);
    r.rows.push_back({to_string(m), 0.0, ms, steps});
  }
  return r;
}

// DAS on pursuit as the position dimension d_s grows (two coordinates per agent).
inline BenchResult bench_feature_scaling(const std::vector<int>& position_dims = {10, 30, 100, 300, 1000}, int steps = 20,
                                         std::uint64_t seed = 1) {
  BenchResult r{"feature-scaling", {}, {}, {}};
  for (int ds : position_dims) {
    if (ds % 2) throw DimensionError("feature-scaling needs even position dimensions");
    Parameters P;
    P.values["agents"] = static_cast<double>(ds / 2);
    const Task task = make_pursuit_task(P);
    const double ms = detail::step_ms(task, task.published_theta, steps, {}, seed);
    r.rows.push_back({"das", static_cast<double>(ds), ms, steps});
  }
  detail::fit_rows(r);
  return r;
}

// DAS on the obstacle task as the obstacle count grows.
inline BenchResult bench_obstacle_scaling(const std::vector<int>& counts = {300, 600, 900}, int steps = 100,
                                          std::uint64_t seed = 1) {
  BenchResult r{"obstacle-scaling", {}, {}, {}};
  for (int n : counts) {
    Parameters P;
    P.values["obstacles"] = static_cast<double>(n);
    const Task task = make_obstacle_task(P);
    const double ms = detail::step_ms(task, task.published_theta, steps, {}, seed);
    r.rows.push_back({"das", static_cast<double>(n), ms, steps});
  }
  detail::fit_rows(r);
  return r;
}

inline BenchResult run_bench(const std::string& suite, std::uint64_t seed = 1) {
  if (suite == "pursuit-scaling") return bench_pursuit_scaling({5, 10, 15, 20, 25}, 100, seed);
  if (suite == "policy-timing") return bench_policy_timing("rendezvous", 50, seed);
  if (suite == "feature-scaling") return bench_feature_scaling({10, 30, 100, 300, 1000}, 20, seed);
  if (suite == "obstacle-scaling") return bench_obstacle_scaling({300, 600, 900}, 100, seed);
  throw ConfigError("suite", "unknown benchmark suite '" + suite + "'");
}

// Raw rows, then one row per fit with the exponent/slope in ms_per_step and R^2 in steps' place.
inline void write_bench_csv(std::ostream& out, const BenchResult& r) {
  CsvWriter w(out, {"suite", "label", "x", "ms_per_step", "steps", "fit", "exponent", "slope", "r2"});
  for (const auto& row : r.rows)
    w.row(std::vector<std::string>{r.suite, row.label, csv_number(row.x), csv_number(row.ms_per_step),
                                   std::to_string(row.steps), "", "", "", ""});
  if (r.power)
    w.row(std::vector<std::string>{r.suite, "fit", "", "", "", "power", csv_number(r.power->exponent), "",
                                   csv_number(r.power->r2)});
  if (r.linear)
    w.row(std::vector<std::string>{r.suite, "fit", "", "", "", "linear", "", csv_number(r.linear->slope),
                                   csv_number(r.linear->r2)});
}

}  // namespace pearl
