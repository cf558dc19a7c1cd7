#pragma once
// Training domain, approximate value iteration and Monte-Carlo policy selection.

#include "pearl/task.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace pearl {

struct TrainingDomain {
  Vector state_lower, state_upper;
  ActionBox actions;

  bool contains(const State& s) const {
    return ((s - state_lower).array() >= 0.0).all() && ((state_upper - s).array() >= 0.0).all();
  }
  bool strictly_contains(const State& s) const {
    return ((s - state_lower).array() > 0.0).all() && ((state_upper - s).array() > 0.0).all();
  }
  State sample(Rng& rng) const {
    State s(state_lower.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      s[i] = std::uniform_real_distribution<double>(state_lower[i], state_upper[i])(rng);
    return s;
  }
};

// Per-coordinate absolute target values named by the preferences, read from
// fixed points, references and point sets. Relations and pairwise terms name
// no absolute location and contribute nothing.
inline std::vector<std::vector<double>> preference_targets(const StateLayout& layout, const std::vector<Preference>& prefs,
                                                           const References& refs) {
  std::vector<std::vector<double>> out(layout.state_dim());
  for (const Preference& p : prefs) {
    for (const std::string& agent : p.agents) {
      const int body = layout.body(agent);
      for (std::size_t k = 0; k < p.axes.size(); ++k) {
        const int c = p.space == Space::position ? layout.position_index(body, p.axes[k]) : layout.velocity_index(body, p.axes[k]);
        switch (p.target) {
          case TargetKind::point: out[c].push_back(p.point.at(k)); break;
          case TargetKind::reference: out[c].push_back(refs.vector(p.reference)[p.axes[k]]); break;
          case TargetKind::nearest: {
            const PointSet& set = refs.point_set(p.reference);
            for (Eigen::Index r = 0; r < set.rows(); ++r) out[c].push_back(set(r, static_cast<Eigen::Index>(k)));
            break;
          }
          case TargetKind::relation:
          case TargetKind::pairwise: break;
        }
      }
    }
  }
  return out;
}

// Bounding box of the preference targets inflated by `margin`; coordinates
// without an absolute target are centred on zero. Velocity coordinates are
// capped by the task's speed limit.
inline TrainingDomain make_training_domain(const Task& task, const References& refs, double margin) {
  if (task.preferences.empty()) throw DimensionError("training domain needs preferences");
  if (!(margin > 0.0)) throw DimensionError("training margin must be positive");
  const int n = task.layout.state_dim(), ds = task.layout.position_dim();
  const auto targets = preference_targets(task.layout, task.preferences, refs);
  TrainingDomain d;
  d.state_lower.resize(n);
  d.state_upper.resize(n);
  for (int c = 0; c < n; ++c) {
    double lo = 0.0, hi = 0.0;
    if (!targets[c].empty()) {
      const auto [mn, mx] = std::minmax_element(targets[c].begin(), targets[c].end());
      lo = *mn;
      hi = *mx;
    }
    d.state_lower[c] = lo - margin;
    d.state_upper[c] = hi + margin;
    if (c >= ds && task.speed_limit) {
      d.state_lower[c] = std::max(d.state_lower[c], -*task.speed_limit);
      d.state_upper[c] = std::min(d.state_upper[c], *task.speed_limit);
    }
  }
  d.actions = ActionBox::symmetric(task.accel_limit);
  return d;
}

struct TrainingConfig {
  int iterations = 300;
  int samples_per_iteration = 100;
  double gamma = 0.9;
  double goal_radius = 0.05;
  int n_mc = 1;
  double margin = 0.4;
  bool intercept = true;  // fit a constant alongside the features; it is not part of theta
  int eval_count = 20;
  double eval_horizon = 20.0;
  std::uint64_t seed = 1;
  bool operator==(const TrainingConfig&) const = default;

  void validate() const {
    if (iterations < 0) throw DimensionError("iterations must be non-negative");
    if (samples_per_iteration < 1) throw DimensionError("samples_per_iteration must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DimensionError("gamma must lie in [0, 1]");
    if (!(goal_radius >= 0.0)) throw DimensionError("goal_radius must be non-negative");
    if (n_mc < 1) throw DimensionError("n_mc must be positive");
    if (!(margin > 0.0)) throw DimensionError("margin must be positive");
    if (eval_count < 1) throw DimensionError("eval_count must be positive");
    if (!(eval_horizon > 0.0)) throw DimensionError("eval_horizon must be positive");
  }
};

struct TrainingResult {
  Vector theta;
  double intercept = 0.0;
  std::vector<double> theta_norms;  // after each iteration
};

// R(s) = 1 when every attractor feature is below goal_radius^2.
inline double training_reward(const FeatureModel& attractors, const State& s, const References& refs, double goal_radius) {
  const Vector F = attractors.features(s, refs);
  return (F.array() < goal_radius * goal_radius).all() ? 1.0 : 0.0;
}

// Approximate value iteration: Bellman targets from a DAS max over the
// training action box, then a least-squares refit of theta.
inline TrainingResult avi_train(const Task& task, const TrainingDomain& domain, const References& refs,
                                const TrainingConfig& cfg, Rng& rng) {
  cfg.validate();
  const FeatureModel& model = task.model();
  const FeatureModel attractors = model.subset(model.attractor_indices());
  const int np = model.size(), n = cfg.samples_per_iteration;
  const int cols = np + (cfg.intercept ? 1 : 0);
  TrainingResult out{Vector::Zero(np), 0.0, {}};
  Matrix X(n, cols);
  Vector y(n);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int k = 0; k < n; ++k) {
      const State s = domain.sample(rng);
      const Vector F = model.features(s, refs);
      X.row(k).head(np) = F.transpose();
      if (cfg.intercept) X(k, np) = 1.0;
      GreedyProblem problem{*task.dynamics, model, out.theta, refs, domain.actions};
      const double best = das_decision(problem, s).q_action + out.intercept;
      y[k] = training_reward(attractors, s, refs, cfg.goal_radius) + cfg.gamma * best;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < cols)
      throw NumericError("singular regression at iteration " + std::to_string(it) + ": " + std::to_string(n) +
                         " samples span rank " + std::to_string(qr.rank()) + " of " + std::to_string(cols));
    const Vector c = qr.solve(y);
    if (!c.allFinite()) throw NumericError("non-finite weights at iteration " + std::to_string(it));
    const Vector next = c.head(np);
    const double old_norm = out.theta.norm(), new_norm = next.norm();
    if (old_norm > 0.0 && new_norm > 10.0 * old_norm)
      throw NumericError("weights diverged at iteration " + std::to_string(it) + ": norm " + std::to_string(old_norm) +
                         " -> " + std::to_string(new_norm));
    out.theta = next;
    out.intercept = cfg.intercept ? c[np] : 0.0;
    out.theta_norms.push_back(new_norm);
  }
  return out;
}

struct PolicyScore {
  double success_rate = 0.0;
  double mean_duration = std::numeric_limits<double>::infinity();  // over successes; inf when none
};

// Deterministic DAS rollouts from each initial state; success means entering the goal region.
inline PolicyScore evaluate_policy(const Vector& theta, const Task& task, const std::vector<State>& eval_set,
                                   double horizon, const PolicyConfig& policy = {}) {
  if (eval_set.empty()) throw DimensionError("evaluation set is empty");
  int ok = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    PlanOptions opt;
    opt.policy = policy;
    opt.seed = i;
    const Trajectory tr = plan_trajectory(task, eval_set[i], theta, horizon, opt);
    if (tr.success()) {
      ++ok;
      total += tr.final_time;
    }
  }
  PolicyScore score;
  score.success_rate = static_cast<double>(ok) / eval_set.size();
  if (ok > 0) score.mean_duration = total / ok;
  return score;
}

struct Candidate {
  Vector theta;
  double success_rate;
  double mean_duration;
};

// Highest success rate, then shortest mean duration, then lowest index.
inline std::size_t select_fittest_index(const std::vector<Candidate>& c) {
  if (c.empty()) throw DimensionError("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i].success_rate > c[best].success_rate ||
        (c[i].success_rate == c[best].success_rate && c[i].mean_duration < c[best].mean_duration))
      best = i;
  }
  return best;
}

inline Vector select_fittest(const std::vector<Candidate>& c) { return c[select_fittest_index(c)].theta; }

// Worker count: hardware concurrency capped by PEARL_THREADS.
inline unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PEARL_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Run fn(i) for i in [0, jobs) on the worker pool. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
  const unsigned workers = worker_count(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < jobs;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

struct TrialReport {
  TrainingResult training;
  PolicyScore score;
  std::string error;  // non-empty when the trial diverged
};

struct TrainingReport {
  Vector theta;
  std::size_t selected = 0;
  std::vector<TrialReport> trials;
  std::vector<State> eval_set;
};

// The task with its goal region replaced by the training reward region.
inline Task training_goal_task(const Task& task, double goal_radius) {
  Task t = task;
  t.goal.preferences = t.model().attractor_indices();
  t.goal.tolerance = goal_radius;
  t.finalize();
  return t;
}

// n_mc independent training runs seeded from (cfg.seed, trial), each scored on
// a shared evaluation set, and the fittest kept.
inline TrainingReport train_monte_carlo(const Task& task, const TrainingConfig& cfg) {
  cfg.validate();
  const References refs = task.initial_refs();
  const TrainingDomain domain = make_training_domain(task, refs, cfg.margin);
  const Task scored = training_goal_task(task, cfg.goal_radius);
  TrainingReport report;
  Rng eval_rng(derive_seed(cfg.seed, 1u << 20));
  for (int i = 0; i < cfg.eval_count; ++i) report.eval_set.push_back(domain.sample(eval_rng));
  report.trials.resize(cfg.n_mc);
  parallel_for(cfg.n_mc, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, i));
    TrialReport& tr = report.trials[i];
    try {
      tr.training = avi_train(task, domain, refs, cfg, rng);
      tr.score = evaluate_policy(tr.training.theta, scored, report.eval_set, cfg.eval_horizon);
    } catch (const NumericError& e) {
      tr.error = e.what();
      tr.training.theta = Vector::Zero(task.size());
      tr.score = PolicyScore{};
    }
  });
  std::vector<Candidate> cands;
  for (const auto& t : report.trials) cands.push_back({t.training.theta, t.score.success_rate, t.score.mean_duration});
  report.selected = select_fittest_index(cands);
  report.theta = cands[report.selected].theta;
  return report;
}

}  // namespace pearl
