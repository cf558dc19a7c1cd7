#pragma once
// Greedy action selection over Q(s, a) = V(f(s) + g(s) a): axial quadratic
// fits (DAS, LSAPA) and hierarchical grid refinement.

#include "pearl/core.hpp"
#include "pearl/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pearl {

struct ActionBox {
  Vector lower, upper;

  static ActionBox symmetric(const Vector& limit) { return {-limit, limit}; }
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Action& a, double tol = 0.0) const {
    return a.size() == lower.size() && ((a - lower).array() >= -tol).all() && ((upper - a).array() >= -tol).all();
  }
  Action clamp(const Action& a) const { return a.cwiseMax(lower).cwiseMin(upper); }
};

// q(u) = p2 u^2 + p1 u + p0
struct AxialQuadratic {
  double p2 = 0.0, p1 = 0.0, p0 = 0.0;
  double operator()(double u) const { return (p2 * u + p1) * u + p0; }
};

namespace detail {

inline AxialQuadratic lagrange3(double u0, double u1, double u2, double q0, double q1, double q2) {
  // Newton divided differences.
  const double d01 = (q1 - q0) / (u1 - u0);
  const double d12 = (q2 - q1) / (u2 - u1);
  const double p2 = (d12 - d01) / (u2 - u0);
  const double p1 = d01 - p2 * (u0 + u1);
  const double p0 = q0 - (p2 * u0 + p1) * u0;
  return {p2, p1, p0};
}

}  // namespace detail

// Least-squares quadratic through (u_j, q_j). Three distinct points give the
// interpolating parabola.
inline AxialQuadratic fit_axial_quadratic(std::span<const double> u, std::span<const double> q) {
  if (u.size() != q.size()) throw DimensionError("axial fit: sample and value counts differ");
  if (u.size() < 3) throw DimensionError("axial fit needs at least 3 samples");
  for (std::size_t j = 0; j < u.size(); ++j)
    if (!std::isfinite(u[j]) || !std::isfinite(q[j])) throw NumericError("axial fit: non-finite sample");
  if (u.size() == 3) {
    if (u[0] == u[1] || u[1] == u[2] || u[0] == u[2]) throw NumericError("axial fit: rank-deficient samples");
    return detail::lagrange3(u[0], u[1], u[2], q[0], q[1], q[2]);
  }
  // Centre and scale u so the Vandermonde columns are well conditioned.
  const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
  const double m = 0.5 * (*mn + *mx), h = 0.5 * (*mx - *mn);
  if (!(h > 0.0)) throw NumericError("axial fit: rank-deficient samples");
  const Eigen::Index n = static_cast<Eigen::Index>(u.size());
  Matrix X(n, 3);
  Vector y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = (u[j] - m) / h;
    X(j, 0) = t * t;
    X(j, 1) = t;
    X(j, 2) = 1.0;
    y[j] = q[j];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < 3) throw NumericError("axial fit: rank-deficient samples");
  const Vector c = qr.solve(y);
  const double a = c[0] / (h * h), b = c[1] / h;
  return {a, b - 2.0 * a * m, (a * m - b) * m + c[2]};
}

// Maximizer of the fitted quadratic over [lo, hi].
inline double axis_maximum(const AxialQuadratic& c, double lo, double hi) {
  if (lo > hi) throw DimensionError("axis bounds are inverted");
  if (lo == hi) return lo;
  if (c.p2 < 0.0) return std::clamp(-c.p1 / (2.0 * c.p2), lo, hi);
  const double flo = c(lo), fhi = c(hi);
  if (flo == fhi) return std::clamp(0.0, lo, hi);  // flat axis: any point is a maximizer
  return fhi > flo ? hi : lo;
}

enum class PolicyMethod { das, lsapa, hoot_grid, boids, apf };

inline std::string to_string(PolicyMethod m) {
  switch (m) {
    case PolicyMethod::das: return "das";
    case PolicyMethod::lsapa: return "lsapa";
    case PolicyMethod::hoot_grid: return "hoot-grid";
    case PolicyMethod::boids: return "boids";
    case PolicyMethod::apf: return "apf";
  }
  return "?";
}

inline PolicyMethod parse_policy_method(const std::string& s) {
  for (PolicyMethod m : {PolicyMethod::das, PolicyMethod::lsapa, PolicyMethod::hoot_grid, PolicyMethod::boids, PolicyMethod::apf})
    if (to_string(m) == s) return m;
  throw DimensionError("unknown policy '" + s + "' (expected das, lsapa, hoot-grid, boids or apf)");
}

struct PolicyConfig {
  PolicyMethod method = PolicyMethod::das;
  int samples_per_axis = 100;  // LSAPA d_n
  int hoot_levels = 3;
  int hoot_branching = 10;
  double apf_alpha = 1.0;
  bool operator==(const PolicyConfig&) const = default;

  void validate() const {
    if (samples_per_axis < 3) throw DimensionError("samples_per_axis must be at least 3");
    if (hoot_levels < 1) throw DimensionError("hoot_levels must be at least 1");
    if (hoot_branching < 2) throw DimensionError("hoot_branching must be at least 2");
    if (!(apf_alpha > 0.0)) throw DimensionError("apf_alpha must be positive");
  }
};

// Everything needed to evaluate Q at one state.
struct GreedyProblem {
  const ControlAffineDynamics& dynamics;
  const FeatureModel& model;
  const Vector& theta;
  const References& refs;
  ActionBox box;
};

struct AxialDecision {
  Action action, non_convex, convex;
  double q_action = 0.0, q_non_convex = 0.0, q_convex = 0.0;
  std::vector<AxialQuadratic> fits;
  long evaluations = 0;
};

namespace detail {

// Q(s, a + xi) over a fixed set of disturbance scenarios, one Probe per scenario
// so that moving along one input column costs only that column's nonzeros.
class ScenarioSet {
 public:
  ScenarioSet(const GreedyProblem& p, const State& s, const std::vector<Action>& xis)
      : p_(p), columns_(p.dynamics.action_dim()) {
    p.model.check_state(s);
    p.model.check_theta(p.theta);
    if (p.box.dim() != p.dynamics.action_dim()) throw DimensionError("action box does not match dynamics");
    State f(s.size());
    p.dynamics.drift_into(s, f);
    for (int i = 0; i < p.dynamics.action_dim(); ++i) columns_[i] = p.dynamics.input_column(s, i);
    probes_.reserve(xis.size());
    for (const Action& xi : xis) {
      State base = f;
      for (const SparseEntry& e : input_delta(columns_, xi)) base[e.index] += e.value;
      if (!base.allFinite()) throw NumericError("non-finite predicted state");
      probes_.emplace_back(p.model, base, p.refs);
      base_v_.push_back(probes_.back().base_value(p.theta));
    }
    mean_base_ = 0.0;
    for (double v : base_v_) mean_base_ += v;
    mean_base_ /= static_cast<double>(base_v_.size());
  }

  int size() const { return static_cast<int>(probes_.size()); }
  const std::vector<SparseVector>& columns() const { return columns_; }
  double mean_base() const { return mean_base_; }

  // Q of scenario j with the action u e_i, relative to the mean base value.
  double axial(int j, int i, double u) {
    ++evaluations;
    scratch_.clear();
    for (const SparseEntry& e : columns_[i]) scratch_.push_back({e.index, e.value * u});
    return (base_v_[j] - mean_base_) + probes_[j].delta_value(p_.theta, scratch_);
  }

  // Scenario-averaged Q of a joint action, relative to the mean base value.
  double joint(const Action& a) {
    const SparseVector d = input_delta(columns_, a);
    double acc = 0.0;
    for (int j = 0; j < size(); ++j) {
      ++evaluations;
      acc += (base_v_[j] - mean_base_) + probes_[j].delta_value(p_.theta, d);
    }
    return acc / size();
  }

  long evaluations = 0;

 private:
  const GreedyProblem& p_;
  std::vector<SparseVector> columns_;
  std::vector<Probe> probes_;
  std::vector<double> base_v_;
  double mean_base_ = 0.0;
  SparseVector scratch_;
};

inline AxialDecision axial_policy(const GreedyProblem& p, const State& s, int samples, bool equispaced,
                                  const std::vector<Action>& scenarios, Rng* rng) {
  const int da = p.dynamics.action_dim();
  ScenarioSet set(p, s, scenarios);
  AxialDecision out;
  out.non_convex = Action::Zero(da);
  out.fits.resize(da);
  std::vector<double> u(samples), q(samples);
  for (int i = 0; i < da; ++i) {
    const double lo = p.box.lower[i], hi = p.box.upper[i];
    if (lo > hi) throw DimensionError("action bounds inverted on axis " + std::to_string(i));
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
      out.non_convex[i] = lo;
      continue;
    }
    for (int j = 0; j < samples; ++j) {
      if (equispaced) {
        u[j] = lo + (hi - lo) * j / (samples - 1);
      } else {
        u[j] = std::uniform_real_distribution<double>(lo, hi)(*rng);
      }
      q[j] = set.axial(j % set.size(), i, u[j]);
    }
    try {
      out.fits[i] = fit_axial_quadratic(u, q);
      out.non_convex[i] = axis_maximum(out.fits[i], lo, hi);
    } catch (const NumericError&) {
      out.non_convex[i] = u[std::max_element(q.begin(), q.end()) - q.begin()];
    }
  }
  out.convex = out.non_convex / static_cast<double>(da);
  out.q_non_convex = set.joint(out.non_convex) + set.mean_base();
  out.q_convex = set.joint(out.convex) + set.mean_base();
  if (out.q_convex >= out.q_non_convex) {
    out.action = out.convex;
    out.q_action = out.q_convex;
  } else {
    out.action = out.non_convex;
    out.q_action = out.q_non_convex;
  }
  out.evaluations = set.evaluations;
  return out;
}

}  // namespace detail

// Deterministic axial sum: three equispaced samples per axis, exact parabola.
inline AxialDecision das_decision(const GreedyProblem& p, const State& s) {
  return detail::axial_policy(p, s, 3, true, {Action::Zero(p.dynamics.action_dim())}, nullptr);
}

inline Action das(const GreedyProblem& p, const State& s) { return das_decision(p, s).action; }

// Least-squares axial policy. Sample j of every axis is simulated under the
// j-th of `samples_per_axis` fresh disturbance draws; the final comparison
// averages over the same draws.
inline AxialDecision lsapa_decision(const GreedyProblem& p, const State& s, const GaussianDisturbance& dist,
                                    int samples_per_axis, Rng& rng) {
  if (samples_per_axis < 3) throw DimensionError("LSAPA needs at least 3 samples per axis");
  dist.validate();
  if (dist.dim() != p.dynamics.action_dim()) throw DimensionError("disturbance does not match action dimension");
  std::vector<Action> scenarios;
  if (dist.deterministic()) {
    scenarios.push_back(dist.mean);
  } else {
    for (int j = 0; j < samples_per_axis; ++j) scenarios.push_back(sample_disturbance(dist, rng));
  }
  return detail::axial_policy(p, s, samples_per_axis, false, scenarios, &rng);
}

inline Action lsapa(const GreedyProblem& p, const State& s, const GaussianDisturbance& dist, int samples_per_axis,
                    Rng& rng) {
  return lsapa_decision(p, s, dist, samples_per_axis, rng).action;
}

struct HootResult {
  Action action;
  double q = 0.0;
  long evaluations = 0;
};

// Hierarchical grid refinement: a branching^d_a grid of cell centres per level,
// descending into the best cell. Under a random disturbance every grid point
// is scored with its own draw.
inline HootResult hoot_decision(const GreedyProblem& p, const State& s, int levels, int branching,
                                const GaussianDisturbance* dist, Rng& rng) {
  if (levels < 1 || branching < 2) throw DimensionError("hoot needs levels >= 1 and branching >= 2");
  const int da = p.dynamics.action_dim();
  const double cells = std::pow(static_cast<double>(branching), da);
  if (cells > 1e7) throw DimensionError("hoot grid of " + std::to_string(branching) + "^" + std::to_string(da) + " points is too large");
  const bool noisy = dist && !dist->deterministic();
  const Action shift = dist ? dist->mean : Action::Zero(da);
  detail::ScenarioSet set(p, s, {Action::Zero(da)});
  Vector lo = p.box.lower, hi = p.box.upper;
  HootResult best{p.box.clamp(Action::Zero(da)), -std::numeric_limits<double>::infinity(), 0};
  std::vector<int> idx(da), best_idx(da);
  Action a(da);
  for (int level = 0; level < levels; ++level) {
    const Vector w = (hi - lo) / branching;
    double level_best = -std::numeric_limits<double>::infinity();
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      for (int k = 0; k < da; ++k) a[k] = lo[k] + (idx[k] + 0.5) * w[k];
      const Action xi = noisy ? sample_disturbance(*dist, rng) : shift;
      const double q = set.joint(a + xi);
      if (q > level_best) {
        level_best = q;
        best_idx = idx;
      }
      if (q > best.q) {
        best.q = q;
        best.action = a;
      }
      int k = 0;
      while (k < da && ++idx[k] == branching) idx[k++] = 0;
      if (k == da) break;
    }
    for (int k = 0; k < da; ++k) {
      lo[k] += best_idx[k] * w[k];
      hi[k] = lo[k] + w[k];
    }
  }
  best.q += set.mean_base();
  best.evaluations = set.evaluations;
  return best;
}

inline Action hoot(const GreedyProblem& p, const State& s, const PolicyConfig& cfg, const GaussianDisturbance* dist,
                   Rng& rng) {
  return hoot_decision(p, s, cfg.hoot_levels, cfg.hoot_branching, dist, rng).action;
}

}  // namespace pearl
