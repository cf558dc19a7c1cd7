// pearl: train weights, plan trajectories, time policies, sweep value-function extrema.

#include "pearl/analysis.hpp"
#include "pearl/bench.hpp"
#include "pearl/config.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pearl;

namespace {

constexpr int kOk = 0, kConfigError = 2, kNumericError = 3;

// A bare preset name ("cargo") resolves to the shipped configs directory.
std::string resolve_config(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path preset = fs::path(PEARL_CONFIG_DIR) / (arg + ".cfg");
  if (fs::exists(preset)) return preset.string();
  throw ConfigError("--config", "no such file or preset '" + arg + "'");
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("--out", "cannot write '" + p.string() + "'");
  return out;
}

struct Options {
  std::string config, weights, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> horizon;
  std::optional<std::string> policy;
  std::string suite;
  std::vector<double> c_values{100.0}, d_values{0.5, 1.0, 2.0, 5.0};
  double lo = -10.0, hi = 10.0;
};

int cmd_train(const Options& o) {
  TaskConfigFile cfg = load_task_config(resolve_config(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.training.n_mc = *o.trials;
  cfg.training.seed = cfg.seed;
  const Task task = build_task(training_view(cfg));
  const TrainingReport rep = train_monte_carlo(task, cfg.training);
  const WeightsFile w = make_weights_file(task.name, cfg.seed, cfg.training, rep);
  open_out(o.out) << serialize_weights(w);
  const auto& best = rep.trials[rep.selected];
  std::cout << "task " << task.name << ": selected trial " << rep.selected << " of " << rep.trials.size()
            << ", theta = [" << rep.theta.transpose() << "], success " << best.score.success_rate << ", mean duration "
            << best.score.mean_duration << " s\n";
  for (std::size_t i = 0; i < rep.trials.size(); ++i)
    if (!rep.trials[i].error.empty()) std::cerr << "trial " << i << ": " << rep.trials[i].error << "\n";
  const bool all_failed = std::all_of(rep.trials.begin(), rep.trials.end(), [](const TrialReport& t) { return !t.error.empty(); });
  return all_failed ? kNumericError : kOk;
}

int cmd_plan(const Options& o) {
  TaskConfigFile cfg = load_task_config(resolve_config(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.horizon) cfg.horizon = *o.horizon;
  if (o.policy) {
    try {
      cfg.policy.method = parse_policy_method(*o.policy);
    } catch (const DimensionError& e) {
      throw ConfigError("--policy", e.what());
    }
  }
  const Task task = build_task(cfg);
  Vector theta;
  if (!o.weights.empty()) {
    const WeightsFile w = load_weights(o.weights);
    theta = Eigen::Map<const Vector>(w.theta.data(), static_cast<Eigen::Index>(w.theta.size()));
  } else {
    theta = config_theta(cfg, task);
  }
  if (theta.size() != task.size())
    throw ConfigError("theta", "has " + std::to_string(theta.size()) + " weights for " + std::to_string(task.size()) +
                                   " preferences");
  const double horizon = cfg.horizon.value_or(task.horizon);
  const std::vector<State> starts = config_initial_states(cfg, task, cfg.trials, cfg.seed);

  PlanOptions base;
  base.policy = cfg.policy;
  base.plant = cfg.disturbance.resolve(task.action_dim());
  if (cfg.planner_disturbance) base.planner = cfg.planner_disturbance->resolve(task.action_dim());
  base.estimate_disturbance = cfg.estimate_disturbance;

  std::vector<Trajectory> trajs(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    PlanOptions opt = base;
    opt.seed = derive_seed(cfg.seed, i);
    trajs[i] = plan_trajectory(task, starts[i], theta, horizon, opt);
  });

  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ofstream summary = open_out(dir / "summary.csv");
  CsvWriter sw(summary, {"trial", "status", "success", "duration", "final_goal_distance", task.metric_name, "mean_plan_ms"});
  int failures = 0, successes = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& tr = trajs[i];
    std::ofstream f = open_out(dir / ("trajectory_" + std::to_string(i) + ".csv"));
    write_trajectory_csv(f, task, tr);
    const double goal_dist = tr.final_goal_distance;
    sw.row(std::vector<std::string>{std::to_string(i), to_string(tr.status), tr.success() ? "1" : "0",
                                    csv_number(tr.final_time), csv_number(goal_dist), csv_number(tr.final_metric),
                                    csv_number(tr.mean_plan_ms())});
    std::cout << "trial " << i << ": " << to_string(tr.status) << ", duration " << tr.final_time << " s, final goal distance "
              << goal_dist << " m" << (tr.diagnostic.empty() ? "" : " (" + tr.diagnostic + ")") << "\n";
    successes += tr.success();
    failures += tr.status == TrajectoryStatus::numeric_failure;
  }
  std::cout << "success " << successes << "/" << trajs.size() << "\n";
  return failures ? kNumericError : kOk;
}

int cmd_bench(const Options& o) {
  const BenchResult r = run_bench(o.suite, o.seed.value_or(1));
  std::ofstream out = open_out(o.out);
  write_bench_csv(out, r);
  for (const auto& row : r.rows) std::cout << r.suite << " " << row.label << " x=" << row.x << ": " << row.ms_per_step << " ms/step\n";
  if (r.power) std::cout << "power-law exponent " << r.power->exponent << " (R^2 " << r.power->r2 << ")\n";
  return kOk;
}

int cmd_analyze(const Options& o) {
  std::ofstream out = open_out(o.out);
  CsvWriter w(out, {"c", "d", "n_minima", "x", "kind", "curvature", "outside_goal_gap", "beyond_obstacle_width"});
  for (double c : o.c_values)
    for (double d : o.d_values) {
      const RestrictedValueParams p{c, d};
      const auto pts = critical_points(p, o.lo, o.hi);
      const std::size_t nmin = minima(pts).size();
      for (const auto& cp : pts)
        w.row(std::vector<std::string>{csv_number(c), csv_number(d), std::to_string(nmin), csv_number(cp.x), to_string(cp.kind),
                                       csv_number(cp.curvature), cp.outside_goal_gap ? "1" : "0",
                                       cp.beyond_obstacle_width ? "1" : "0"});
      std::cout << "c=" << c << " d=" << d << ": " << nmin << " minima\n";
    }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PEARL motion planning: train, plan, bench, analyze"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> policies{"das", "lsapa", "hoot-grid", "boids", "apf"};

  auto* train = app.add_subcommand("train", "Learn feature weights by value iteration and Monte-Carlo selection");
  train->add_option("--config", o.config, "Config file or preset name")->required();
  train->add_option("--out", o.out, "Weights file to write")->required();
  train->add_option("--seed", o.seed, "Master seed");
  train->add_option("--trials", o.trials, "Monte-Carlo training trials")->check(CLI::PositiveNumber);

  auto* plan = app.add_subcommand("plan", "Plan closed-loop trajectories");
  plan->add_option("--config", o.config, "Config file or preset name")->required();
  plan->add_option("--weights", o.weights, "Weights file (default: config theta, then published weights)");
  plan->add_option("--out", o.out, "Output directory")->required();
  plan->add_option("--seed", o.seed, "Master seed");
  plan->add_option("--trials", o.trials, "Number of sampled initial conditions")->check(CLI::PositiveNumber);
  plan->add_option("--horizon", o.horizon, "Trajectory length in seconds")->check(CLI::NonNegativeNumber);
  plan->add_option("--policy", o.policy, "Action selection")->check(CLI::IsMember(policies));

  auto* bench = app.add_subcommand("bench", "Per-step timing suites with scaling fits");
  bench->add_option("suite", o.suite, "Suite name")->required()->check(CLI::IsMember(bench_suites()));
  bench->add_option("--out", o.out, "CSV to write")->required();
  bench->add_option("--seed", o.seed, "Master seed");

  auto* analyze = app.add_subcommand("analyze", "Critical points of the restricted value function");
  analyze->add_option("--c", o.c_values, "Repeller/attractor weight ratios")->delimiter(',')->check(CLI::NonNegativeNumber);
  analyze->add_option("--d", o.d_values, "Obstacle half-separations")->delimiter(',')->check(CLI::NonNegativeNumber);
  analyze->add_option("--lo", o.lo, "Search interval lower end");
  analyze->add_option("--hi", o.hi, "Search interval upper end");
  analyze->add_option("--out", o.out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(o);
    if (*plan) return cmd_plan(o);
    if (*bench) return cmd_bench(o);
    if (*analyze) return cmd_analyze(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  }
  return kOk;
}
