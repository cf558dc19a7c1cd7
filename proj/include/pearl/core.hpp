#pragma once
// Control-affine dynamics, disturbance sampling and estimation.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pearl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Bad shapes or malformed inputs.
struct DimensionError : Error {
  using Error::Error;
};
// Non-finite numbers, singular fits, diverging iterations.
struct NumericError : Error {
  using Error::Error;
};

// Stream seed for trial `index` of a run seeded with `master` (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

struct SparseEntry {
  int index;
  double value;
};
using SparseVector = std::vector<SparseEntry>;

// s' = f(s) + g(s) a.
class ControlAffineDynamics {
 public:
  virtual ~ControlAffineDynamics() = default;

  // Number of position coordinates; the state holds positions then velocities.
  virtual int position_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual double dt() const = 0;
  int state_dim() const { return 2 * position_dim(); }

  // Unchecked step; `out` must not alias `s`.
  virtual void step_into(const State& s, const Action& a, State& out) const = 0;

  virtual void drift_into(const State& s, State& out) const {
    step_into(s, Action::Zero(action_dim()), out);
  }

  // Column `axis` of g(s), nonzeros only.
  virtual SparseVector input_column(const State& s, int axis) const {
    State base(state_dim()), moved(state_dim());
    drift_into(s, base);
    Action e = Action::Zero(action_dim());
    e[axis] = 1.0;
    step_into(s, e, moved);
    SparseVector col;
    for (int i = 0; i < state_dim(); ++i) {
      double d = moved[i] - base[i];
      if (d != 0.0) col.push_back({i, d});
    }
    return col;
  }
};

inline void check_step_args(const ControlAffineDynamics& dyn, const State& s, const Action& a) {
  if (s.size() != dyn.state_dim())
    throw DimensionError("state has " + std::to_string(s.size()) + " coordinates, dynamics expect " +
                         std::to_string(dyn.state_dim()));
  if (a.size() != dyn.action_dim())
    throw DimensionError("action has " + std::to_string(a.size()) + " coordinates, dynamics expect " +
                         std::to_string(dyn.action_dim()));
  if (!s.allFinite()) throw NumericError("non-finite state");
  if (!a.allFinite()) throw NumericError("non-finite action");
}

inline State step(const ControlAffineDynamics& dyn, const State& s, const Action& a) {
  check_step_args(dyn, s, a);
  State out(dyn.state_dim());
  dyn.step_into(s, a, out);
  return out;
}

// The disturbance enters through the same input channel as the action.
inline State step_disturbed(const ControlAffineDynamics& dyn, const State& s, const Action& a,
                            const Action& xi) {
  if (xi.size() != dyn.action_dim())
    throw DimensionError("disturbance has " + std::to_string(xi.size()) + " coordinates, dynamics expect " +
                         std::to_string(dyn.action_dim()));
  return step(dyn, s, a + xi);
}

// Linear time-invariant dynamics made of small decoupled blocks, each owning
// a handful of state coordinates and input axes. Double integrators and the
// linearized pendulums all fit this shape, and the block structure keeps a
// step O(state dimension).
class BlockLinearDynamics final : public ControlAffineDynamics {
 public:
  struct Block {
    std::vector<int> coords;
    std::vector<int> inputs;
    Matrix A;  // coords x coords
    Matrix B;  // coords x inputs
  };

  BlockLinearDynamics(int position_dim, int action_dim, double dt)
      : ds_(position_dim), da_(action_dim), dt_(dt), owner_(2 * position_dim, -1) {
    if (position_dim <= 0 || action_dim <= 0) throw DimensionError("dynamics need positive dimensions");
    columns_.resize(action_dim);
    if (!(dt > 0.0)) throw DimensionError("time step must be positive");
  }

  int position_dim() const override { return ds_; }
  int action_dim() const override { return da_; }
  double dt() const override { return dt_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Exact zero-order hold of p'' = a on one axis; input < 0 leaves it unactuated.
  void add_double_integrator(int position, int velocity, int input) {
    Block b;
    b.coords = {position, velocity};
    b.A = Matrix{{1.0, dt_}, {0.0, 1.0}};
    if (input >= 0) {
      b.inputs = {input};
      b.B = Matrix{{0.5 * dt_ * dt_}, {dt_}};
    } else {
      b.B = Matrix(2, 0);
    }
    add_block(std::move(b));
  }

  // Zero-order hold of x' = Ac x + Bc u over one step, via the matrix exponential
  // of the augmented generator.
  void add_continuous_block(std::vector<int> coords, std::vector<int> inputs, const Matrix& Ac,
                            const Matrix& Bc) {
    const int n = static_cast<int>(coords.size());
    const int m = static_cast<int>(inputs.size());
    if (Ac.rows() != n || Ac.cols() != n || Bc.rows() != n || Bc.cols() != m)
      throw DimensionError("continuous block shapes disagree");
    Matrix M = Matrix::Zero(n + m, n + m);
    M.topLeftCorner(n, n) = Ac * dt_;
    M.topRightCorner(n, m) = Bc * dt_;
    Matrix E = M.exp();
    Block b;
    b.coords = std::move(coords);
    b.inputs = std::move(inputs);
    b.A = E.topLeftCorner(n, n);
    b.B = E.topRightCorner(n, m);
    add_block(std::move(b));
  }

  // Every coordinate must belong to exactly one block before stepping.
  void validate() const {
    for (int i = 0; i < 2 * ds_; ++i)
      if (owner_[i] < 0) throw DimensionError("state coordinate " + std::to_string(i) + " has no dynamics");
  }

  void step_into(const State& s, const Action& a, State& out) const override {
    for (const Block& b : blocks_) {
      const int n = static_cast<int>(b.coords.size());
      const int m = static_cast<int>(b.inputs.size());
      for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += b.A(r, c) * s[b.coords[c]];
        for (int c = 0; c < m; ++c) acc += b.B(r, c) * a[b.inputs[c]];
        out[b.coords[r]] = acc;
      }
    }
  }

  SparseVector input_column(const State&, int axis) const override {
    if (axis < 0 || axis >= da_) return {};
    return columns_[axis];
  }

 private:
  void add_block(Block b) {
    for (int c : b.coords) {
      if (c < 0 || c >= 2 * ds_) throw DimensionError("block coordinate out of range");
      if (owner_[c] >= 0) throw DimensionError("state coordinate " + std::to_string(c) + " in two blocks");
      owner_[c] = static_cast<int>(blocks_.size());
    }
    for (int i : b.inputs)
      if (i < 0 || i >= da_) throw DimensionError("block input out of range");
    for (std::size_t c = 0; c < b.inputs.size(); ++c)
      for (std::size_t r = 0; r < b.coords.size(); ++r)
        if (b.B(r, c) != 0.0) columns_[b.inputs[c]].push_back({b.coords[r], b.B(r, c)});
    blocks_.push_back(std::move(b));
  }

  int ds_, da_;
  double dt_;
  std::vector<int> owner_;
  std::vector<Block> blocks_;
  std::vector<SparseVector> columns_;  // input columns, filled as blocks are added
};

struct GaussianDisturbance {
  Vector mean;
  Vector stddev;

  static GaussianDisturbance none(int dim) { return {Vector::Zero(dim), Vector::Zero(dim)}; }
  static GaussianDisturbance iid(int dim, double mu, double sigma) {
    return {Vector::Constant(dim, mu), Vector::Constant(dim, sigma)};
  }

  int dim() const { return static_cast<int>(mean.size()); }
  bool deterministic() const { return (stddev.array() == 0.0).all(); }
  bool is_zero() const { return deterministic() && (mean.array() == 0.0).all(); }

  void validate() const {
    if (mean.size() != stddev.size()) throw DimensionError("disturbance mean and std lengths differ");
    if (!mean.allFinite() || !stddev.allFinite()) throw NumericError("non-finite disturbance parameters");
    if ((stddev.array() < 0.0).any()) throw DimensionError("disturbance std must be non-negative");
  }
};

inline Action sample_disturbance(const GaussianDisturbance& dist, Rng& rng) {
  Action xi(dist.dim());
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int i = 0; i < dist.dim(); ++i) {
    // A draw is consumed even for zero std so streams stay aligned across configs.
    double z = n01(rng);
    xi[i] = dist.mean[i] + dist.stddev[i] * z;
  }
  return xi;
}

// Mean and sample std of (observed - commanded) over the last `window` pairs.
inline GaussianDisturbance estimate_disturbance(std::span<const std::pair<Action, Action>> history,
                                                std::size_t window = 100) {
  if (history.empty()) throw DimensionError("disturbance history is empty");
  if (window < 2) throw DimensionError("disturbance window must be at least 2");
  const std::size_t n = std::min(window, history.size());
  const auto recent = history.subspan(history.size() - n);
  const int dim = static_cast<int>(recent.front().first.size());
  Vector mean = Vector::Zero(dim);
  for (const auto& [cmd, obs] : recent) {
    if (cmd.size() != dim || obs.size() != dim) throw DimensionError("disturbance history lengths differ");
    mean += obs - cmd;
  }
  mean /= static_cast<double>(n);
  Vector var = Vector::Zero(dim);
  for (const auto& [cmd, obs] : recent) var += (obs - cmd - mean).cwiseAbs2();
  Vector sd = n > 1 ? Vector((var / static_cast<double>(n - 1)).cwiseSqrt()) : Vector::Zero(dim);
  return {mean, sd};
}

// Sliding-window estimator fed one (commanded, observed) pair per step.
class DisturbanceEstimator {
 public:
  explicit DisturbanceEstimator(std::size_t window = 100) : window_(window) {
    if (window < 2) throw DimensionError("disturbance window must be at least 2");
  }
  void push(const Action& commanded, const Action& observed) {
    history_.emplace_back(commanded, observed);
    if (history_.size() > window_) history_.erase(history_.begin());
  }
  bool empty() const { return history_.empty(); }
  std::size_t size() const { return history_.size(); }
  GaussianDisturbance estimate() const { return estimate_disturbance(history_, window_); }

 private:
  std::size_t window_;
  std::vector<std::pair<Action, Action>> history_;
};

}  // namespace pearl
