#pragma once
// Attractor / repeller features and the linear value function V = theta . F(s).

#include "pearl/core.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pearl {

struct Body {
  std::string name;
  int dof = 0;
};

// Positions of every body (in body order), then velocities in the same order.
class StateLayout {
 public:
  StateLayout() = default;
  explicit StateLayout(std::vector<Body> bodies) : bodies_(std::move(bodies)) {
    for (const Body& b : bodies_) {
      if (b.dof <= 0) throw DimensionError("body '" + b.name + "' has no degrees of freedom");
      offsets_.push_back(ds_);
      ds_ += b.dof;
    }
    for (std::size_t i = 0; i < bodies_.size(); ++i)
      for (std::size_t j = i + 1; j < bodies_.size(); ++j)
        if (bodies_[i].name == bodies_[j].name) throw DimensionError("duplicate body name '" + bodies_[i].name + "'");
  }

  int position_dim() const { return ds_; }
  int state_dim() const { return 2 * ds_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  int body_count() const { return static_cast<int>(bodies_.size()); }

  std::optional<int> find_body(std::string_view name) const {
    for (std::size_t i = 0; i < bodies_.size(); ++i)
      if (bodies_[i].name == name) return static_cast<int>(i);
    return std::nullopt;
  }
  int body(std::string_view name) const {
    if (auto i = find_body(name)) return *i;
    throw DimensionError("unknown body '" + std::string(name) + "'");
  }
  int position_index(int body, int axis) const { return offsets_.at(body) + checked_axis(body, axis); }
  int velocity_index(int body, int axis) const { return ds_ + position_index(body, axis); }

  std::string coordinate_name(int coord) const {
    const bool vel = coord >= ds_;
    int p = vel ? coord - ds_ : coord;
    for (std::size_t b = 0; b < bodies_.size(); ++b)
      if (p < offsets_[b] + bodies_[b].dof)
        return (vel ? "v_" : "p_") + bodies_[b].name + "_" + std::to_string(p - offsets_[b]);
    throw DimensionError("coordinate " + std::to_string(coord) + " out of range");
  }

 private:
  int checked_axis(int body, int axis) const {
    if (axis < 0 || axis >= bodies_.at(body).dof)
      throw DimensionError("axis " + std::to_string(axis) + " out of range for body '" + bodies_[body].name + "'");
    return axis;
  }

  std::vector<Body> bodies_;
  std::vector<int> offsets_;
  int ds_ = 0;
};

enum class PreferenceKind { attractor, repeller };
enum class Space { position, velocity };

// point:     fixed coordinates, one per selected axis.
// reference: a named per-step vector from References, indexed by axis.
// relation:  another body's projection plus a constant offset per selected axis.
// pairwise:  one shared term over all pairs of the listed agents.
// nearest:   closest row of a named point set (rows hold the selected axes).
enum class TargetKind { point, reference, relation, pairwise, nearest };

struct Preference {
  std::string name;
  PreferenceKind kind = PreferenceKind::attractor;
  Space space = Space::position;
  std::vector<int> axes;
  std::vector<std::string> agents;
  TargetKind target = TargetKind::point;
  std::vector<double> point;
  std::string reference;
  std::string partner;
  std::vector<double> offset;
  double beta = 1.0;

  bool operator==(const Preference&) const = default;
};

using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-step exogenous quantities the features read (prey state, obstacle positions).
struct References {
  std::map<std::string, Vector, std::less<>> vectors;
  std::map<std::string, PointSet, std::less<>> point_sets;

  const Vector& vector(std::string_view name) const {
    auto it = vectors.find(name);
    if (it == vectors.end()) throw DimensionError("missing reference '" + std::string(name) + "'");
    return it->second;
  }
  const PointSet& point_set(std::string_view name) const {
    auto it = point_sets.find(name);
    if (it == point_sets.end()) throw DimensionError("missing point set '" + std::string(name) + "'");
    return it->second;
  }
};

class FeatureModel;

// Feature values at a base state plus cheap re-evaluation under sparse state
// perturbations. Each delta costs time proportional to its nonzeros (times the
// point-set size for nearest-point features). Not thread safe: one per worker.
class Probe {
 public:
  Probe(const FeatureModel& model, const State& s, const References& refs);

  const Vector& base_features() const { return F_; }
  double base_value(const Vector& theta) const { return theta.dot(F_); }

  // Feature change when the state moves by `delta` (entries may repeat a coordinate).
  Vector delta_features(std::span<const SparseEntry> delta);
  double delta_value(const Vector& theta, std::span<const SparseEntry> delta);

 private:
  template <class Sink>
  void accumulate(std::span<const SparseEntry> delta, Sink&& sink);

  const FeatureModel* model_;
  std::vector<const PointSet*> sets_;
  Vector F_;
  std::vector<double> target_, r_, q_, phi_, gval_, s1_, s2_, shift_;
  // scratch, always returned to zero
  std::vector<double> coord_dv_, term_dv_, gval_dv_, dq_, ds1_, ds2_;
  std::vector<char> coord_mark_, term_mark_, gval_mark_, group_mark_;
  std::vector<int> coords_touched_, terms_touched_, gvals_touched_, groups_touched_;
};

class FeatureModel {
 public:
  FeatureModel() = default;
  FeatureModel(StateLayout layout, std::vector<Preference> prefs) : layout_(std::move(layout)), prefs_(std::move(prefs)) {
    compile();
  }

  const StateLayout& layout() const { return layout_; }
  const std::vector<Preference>& preferences() const { return prefs_; }
  int size() const { return static_cast<int>(prefs_.size()); }

  bool attractor_only() const {
    return std::all_of(prefs_.begin(), prefs_.end(), [](const Preference& p) { return p.kind == PreferenceKind::attractor; });
  }

  // Model over a subset of the preferences, in the given order.
  FeatureModel subset(const std::vector<int>& idx) const {
    std::vector<Preference> p;
    for (int i : idx) p.push_back(prefs_.at(i));
    return FeatureModel(layout_, std::move(p));
  }

  std::vector<int> attractor_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (prefs_[i].kind == PreferenceKind::attractor) out.push_back(i);
    return out;
  }

  // State coordinates each preference reads (agent projections and partners).
  std::vector<int> coordinates(int pref) const {
    std::vector<int> out;
    const Compiled& c = compiled_.at(pref);
    for (int g = c.first_group; g < c.first_group + c.n_groups; ++g) {
      const Group& gr = groups_[g];
      if (c.target == TargetKind::pairwise || c.target == TargetKind::nearest) {
        for (int i = gr.first; i < gr.first + gr.count; ++i) out.push_back(gcoords_[i]);
      } else {
        for (int t = gr.first; t < gr.first + gr.count; ++t) {
          out.push_back(terms_[t].coord);
          if (terms_[t].partner >= 0) out.push_back(terms_[t].partner);
        }
      }
    }
    return out;
  }

  void check_state(const State& s) const {
    if (s.size() != layout_.state_dim())
      throw DimensionError("state has " + std::to_string(s.size()) + " coordinates, layout expects " +
                           std::to_string(layout_.state_dim()));
    if (!s.allFinite()) throw NumericError("non-finite state");
  }
  void check_theta(const Vector& theta) const {
    if (theta.size() != size())
      throw DimensionError("weight vector has " + std::to_string(theta.size()) + " entries, model has " +
                           std::to_string(size()) + " preferences");
    if (!theta.allFinite()) throw NumericError("non-finite weights");
  }

  Vector features(const State& s, const References& refs) const {
    check_state(s);
    return Probe(*this, s, refs).base_features();
  }
  double value(const State& s, const Vector& theta, const References& refs) const {
    check_theta(theta);
    return theta.dot(features(s, refs));
  }

 private:
  friend class Probe;

  struct Term {
    int coord;
    int partner;   // -1 when the target is not another body
    int group;
    double fixed;  // point coordinate or relation offset
    int ref;       // index into ref_names_, -1 if none
    int component;
  };
  struct Group {
    int pref;
    int first;  // into terms_ (sum-of-squares) or gcoords_ (pairwise, nearest)
    int count;
    int s1;     // pairwise: index of its first S1 slot
  };
  struct Compiled {
    PreferenceKind kind;
    TargetKind target;
    double beta;
    int first_group, n_groups, n_axes;
    int set = -1;  // nearest: index into set_names_
  };
  enum class OccKind { term, pair, nearest };
  struct Occurrence {
    OccKind kind;
    int slot;     // term id or gcoords_ index
    double sign;  // +1 own coordinate, -1 relation partner
  };

  void compile() {
    const int n = layout_.state_dim();
    occ_.assign(n, {});
    for (int pi = 0; pi < size(); ++pi) {
      const Preference& p = prefs_[pi];
      auto fail = [&](const std::string& what) {
        throw DimensionError("preference '" + (p.name.empty() ? std::to_string(pi) : p.name) + "': " + what);
      };
      if (p.agents.empty()) fail("agents is empty");
      if (p.axes.empty()) fail("axes is empty");
      if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) fail("beta must be finite and non-negative");
      if (p.kind == PreferenceKind::repeller && p.beta == 0.0 && p.target != TargetKind::pairwise)
        fail("repeller with beta 0 is unbounded");
      const int na = static_cast<int>(p.axes.size());
      auto coord_of = [&](int body, int axis) {
        return p.space == Space::position ? layout_.position_index(body, axis) : layout_.velocity_index(body, axis);
      };
      std::vector<int> bodies;
      for (const std::string& a : p.agents) {
        auto b = layout_.find_body(a);
        if (!b) fail("unknown agent '" + a + "'");
        bodies.push_back(*b);
      }

      Compiled c{p.kind, p.target, p.beta, static_cast<int>(groups_.size()), 0, na};
      switch (p.target) {
        case TargetKind::point:
        case TargetKind::reference:
        case TargetKind::relation: {
          int ref = -1, partner_body = -1;
          if (p.target == TargetKind::point && static_cast<int>(p.point.size()) != na)
            fail("point needs one coordinate per axis");
          if (p.target == TargetKind::reference) {
            if (p.reference.empty()) fail("reference name is empty");
            ref = intern(ref_names_, p.reference);
          }
          if (p.target == TargetKind::relation) {
            auto b = layout_.find_body(p.partner);
            if (!b) fail("unknown partner '" + p.partner + "'");
            partner_body = *b;
            if (!p.offset.empty() && static_cast<int>(p.offset.size()) != na) fail("offset needs one entry per axis");
          }
          for (int body : bodies) {
            if (body == partner_body) fail("agent is its own relation partner");
            Group g{pi, static_cast<int>(terms_.size()), na, -1};
            for (int k = 0; k < na; ++k) {
              Term t{coord_of(body, p.axes[k]), -1, static_cast<int>(groups_.size()), 0.0, ref, p.axes[k]};
              if (p.target == TargetKind::point) t.fixed = p.point[k];
              if (p.target == TargetKind::relation) {
                t.partner = coord_of(partner_body, p.axes[k]);
                t.fixed = p.offset.empty() ? 0.0 : p.offset[k];
              }
              occ_[t.coord].push_back({OccKind::term, static_cast<int>(terms_.size()), 1.0});
              if (t.partner >= 0) occ_[t.partner].push_back({OccKind::term, static_cast<int>(terms_.size()), -1.0});
              terms_.push_back(t);
            }
            groups_.push_back(g);
          }
          break;
        }
        case TargetKind::pairwise: {
          Group g{pi, static_cast<int>(gcoords_.size()), na * static_cast<int>(bodies.size()), n_s1_};
          for (int body : bodies)
            for (int k = 0; k < na; ++k) {
              int coord = coord_of(body, p.axes[k]);
              occ_[coord].push_back({OccKind::pair, static_cast<int>(gcoords_.size()), 1.0});
              gcoords_.push_back(coord);
              gaxis_.push_back(k);
              ggroup_.push_back(static_cast<int>(groups_.size()));
            }
          n_s1_ += na;
          groups_.push_back(g);
          if (p.kind == PreferenceKind::repeller && p.beta == 0.0) fail("pairwise repeller needs beta > 0");
          break;
        }
        case TargetKind::nearest: {
          if (p.reference.empty()) fail("nearest target needs a point-set name");
          c.set = intern(set_names_, p.reference);
          for (int body : bodies) {
            Group g{pi, static_cast<int>(gcoords_.size()), na, -1};
            for (int k = 0; k < na; ++k) {
              int coord = coord_of(body, p.axes[k]);
              occ_[coord].push_back({OccKind::nearest, static_cast<int>(gcoords_.size()), 1.0});
              gcoords_.push_back(coord);
              gaxis_.push_back(k);
              ggroup_.push_back(static_cast<int>(groups_.size()));
            }
            groups_.push_back(g);
          }
          break;
        }
      }
      c.n_groups = static_cast<int>(groups_.size()) - c.first_group;
      compiled_.push_back(c);
    }
  }

  static int intern(std::vector<std::string>& names, const std::string& n) {
    auto it = std::find(names.begin(), names.end(), n);
    if (it != names.end()) return static_cast<int>(it - names.begin());
    names.push_back(n);
    return static_cast<int>(names.size()) - 1;
  }

  StateLayout layout_;
  std::vector<Preference> prefs_;
  std::vector<Compiled> compiled_;
  std::vector<Group> groups_;
  std::vector<Term> terms_;
  std::vector<int> gcoords_, gaxis_, ggroup_;
  int n_s1_ = 0;
  std::vector<std::vector<Occurrence>> occ_;
  std::vector<std::string> ref_names_, set_names_;
};

namespace detail {

inline double phi(PreferenceKind kind, double beta, double q) {
  return kind == PreferenceKind::attractor ? q : 1.0 / (beta + q);
}

// Squared distance from `x` (n_axes values) to the nearest row of `set`.
inline double nearest_sq(const PointSet& set, const double* x, int n_axes) {
  if (set.rows() == 0) return std::numeric_limits<double>::infinity();
  if (set.cols() != n_axes) throw DimensionError("point set width does not match preference axes");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    const double* row = set.data() + i * n_axes;
    double d = 0.0;
    for (int k = 0; k < n_axes; ++k) {
      double e = x[k] - row[k];
      d += e * e;
    }
    best = std::min(best, d);
  }
  return best;
}

}  // namespace detail

inline Probe::Probe(const FeatureModel& m, const State& s, const References& refs) : model_(&m) {
  m.check_state(s);
  const int np = m.size();
  F_ = Vector::Zero(np);
  for (const std::string& n : m.set_names_) sets_.push_back(&refs.point_set(n));
  std::vector<const Vector*> vecs;
  for (const std::string& n : m.ref_names_) vecs.push_back(&refs.vector(n));

  const std::size_t nt = m.terms_.size(), ng = m.groups_.size(), nc = m.gcoords_.size();
  target_.resize(nt);
  r_.resize(nt);
  q_.assign(ng, 0.0);
  phi_.assign(ng, 0.0);
  gval_.resize(nc);
  s1_.assign(m.n_s1_, 0.0);
  s2_.assign(ng, 0.0);
  shift_.assign(m.n_s1_, 0.0);

  for (std::size_t t = 0; t < nt; ++t) {
    const auto& term = m.terms_[t];
    double target = term.fixed;
    if (term.ref >= 0) {
      const Vector& v = *vecs[term.ref];
      if (term.component >= v.size())
        throw DimensionError("reference '" + m.ref_names_[term.ref] + "' is too short");
      target += v[term.component];
    }
    target_[t] = target;
    double r = s[term.coord] - target - (term.partner >= 0 ? s[term.partner] : 0.0);
    r_[t] = r;
    q_[term.group] += r * r;
  }
  for (std::size_t i = 0; i < nc; ++i) gval_[i] = s[m.gcoords_[i]];

  for (int pi = 0; pi < np; ++pi) {
    const auto& c = m.compiled_[pi];
    for (int g = c.first_group; g < c.first_group + c.n_groups; ++g) {
      const auto& gr = m.groups_[g];
      if (c.target == TargetKind::pairwise) {
        // Centre on the agent mean so the moment form keeps its precision.
        const int na = c.n_axes, agents = gr.count / na;
        for (int i = 0; i < gr.count; ++i) shift_[gr.s1 + i % na] += gval_[gr.first + i];
        for (int k = 0; k < na; ++k) shift_[gr.s1 + k] /= agents;
        double S2 = 0.0;
        for (int i = 0; i < gr.count; ++i) {
          double x = gval_[gr.first + i] - shift_[gr.s1 + i % na];
          s1_[gr.s1 + i % na] += x;
          S2 += x * x;
        }
        s2_[g] = S2;
        double sum_s1 = 0.0;
        for (int k = 0; k < na; ++k) sum_s1 += s1_[gr.s1 + k] * s1_[gr.s1 + k];
        q_[g] = std::max(0.0, 2.0 * agents * S2 - 2.0 * sum_s1);
      } else if (c.target == TargetKind::nearest) {
        q_[g] = detail::nearest_sq(*sets_[c.set], &gval_[gr.first], c.n_axes);
      }
      phi_[g] = detail::phi(c.kind, c.beta, q_[g]);
      F_[pi] += phi_[g];
    }
  }

  coord_dv_.assign(m.layout_.state_dim(), 0.0);
  coord_mark_.assign(m.layout_.state_dim(), 0);
  term_dv_.assign(nt, 0.0);
  term_mark_.assign(nt, 0);
  gval_dv_.assign(nc, 0.0);
  gval_mark_.assign(nc, 0);
  dq_.assign(ng, 0.0);
  ds2_.assign(ng, 0.0);
  ds1_.assign(m.n_s1_, 0.0);
  group_mark_.assign(ng, 0);
}

template <class Sink>
void Probe::accumulate(std::span<const SparseEntry> delta, Sink&& sink) {
  const FeatureModel& m = *model_;
  for (const SparseEntry& e : delta) {
    if (e.index < 0 || e.index >= static_cast<int>(coord_dv_.size())) throw DimensionError("delta index out of range");
    if (!coord_mark_[e.index]) {
      coord_mark_[e.index] = 1;
      coords_touched_.push_back(e.index);
    }
    coord_dv_[e.index] += e.value;
  }
  auto touch_group = [&](int g) {
    if (!group_mark_[g]) {
      group_mark_[g] = 1;
      groups_touched_.push_back(g);
    }
  };
  for (int c : coords_touched_) {
    const double dv = coord_dv_[c];
    for (const auto& o : m.occ_[c]) {
      if (o.kind == FeatureModel::OccKind::term) {
        if (!term_mark_[o.slot]) {
          term_mark_[o.slot] = 1;
          terms_touched_.push_back(o.slot);
        }
        term_dv_[o.slot] += o.sign * dv;
      } else {
        if (!gval_mark_[o.slot]) {
          gval_mark_[o.slot] = 1;
          gvals_touched_.push_back(o.slot);
        }
        gval_dv_[o.slot] += dv;
      }
    }
    coord_dv_[c] = 0.0;
    coord_mark_[c] = 0;
  }
  coords_touched_.clear();

  for (int t : terms_touched_) {
    const double d = term_dv_[t];
    const int g = m.terms_[t].group;
    dq_[g] += d * (2.0 * r_[t] + d);
    touch_group(g);
    term_dv_[t] = 0.0;
    term_mark_[t] = 0;
  }
  terms_touched_.clear();

  for (int i : gvals_touched_) {
    const int g = m.ggroup_[i];
    const auto& gr = m.groups_[g];
    if (gr.s1 >= 0) {
      const int k = m.gaxis_[i];
      const double x = gval_[i] - shift_[gr.s1 + k], d = gval_dv_[i];
      ds1_[gr.s1 + k] += d;
      ds2_[g] += d * (2.0 * x + d);
    }
    touch_group(g);
  }

  for (int g : groups_touched_) {
    const auto& gr = m.groups_[g];
    const auto& c = m.compiled_[gr.pref];
    double dq = 0.0;
    if (c.target == TargetKind::pairwise) {
      const int agents = gr.count / c.n_axes;
      double d_sum_s1 = 0.0;
      for (int k = 0; k < c.n_axes; ++k) {
        const double s1 = s1_[gr.s1 + k], d = ds1_[gr.s1 + k];
        d_sum_s1 += d * (2.0 * s1 + d);
        ds1_[gr.s1 + k] = 0.0;
      }
      dq = 2.0 * agents * ds2_[g] - 2.0 * d_sum_s1;
      ds2_[g] = 0.0;
    } else if (c.target == TargetKind::nearest) {
      double x[8];
      std::vector<double> big;
      double* p = x;
      if (c.n_axes > 8) {
        big.resize(c.n_axes);
        p = big.data();
      }
      for (int k = 0; k < c.n_axes; ++k) p[k] = gval_[gr.first + k] + gval_dv_[gr.first + k];
      // An empty set stays empty: the feature is identically zero.
      dq = std::isfinite(q_[g]) ? detail::nearest_sq(*sets_[c.set], p, c.n_axes) - q_[g] : 0.0;
    } else {
      dq = dq_[g];
    }
    dq_[g] = 0.0;
    double dphi;
    if (c.kind == PreferenceKind::attractor) {
      dphi = dq;
    } else if (!std::isfinite(q_[g])) {
      dphi = 0.0;
    } else {
      const double q1 = std::max(q_[g] + dq, 0.0);
      dphi = (q_[g] - q1) / ((c.beta + q_[g]) * (c.beta + q1));
    }
    sink(gr.pref, dphi);
    group_mark_[g] = 0;
  }
  groups_touched_.clear();

  for (int i : gvals_touched_) {
    gval_dv_[i] = 0.0;
    gval_mark_[i] = 0;
  }
  gvals_touched_.clear();
}

inline Vector Probe::delta_features(std::span<const SparseEntry> delta) {
  Vector dF = Vector::Zero(F_.size());
  accumulate(delta, [&](int pref, double dphi) { dF[pref] += dphi; });
  return dF;
}

inline double Probe::delta_value(const Vector& theta, std::span<const SparseEntry> delta) {
  double dv = 0.0;
  accumulate(delta, [&](int pref, double dphi) { dv += theta[pref] * dphi; });
  return dv;
}

// Single-preference evaluations.
inline double attractor_feature(const StateLayout& layout, const State& s, const Preference& pref, const References& refs) {
  if (pref.kind != PreferenceKind::attractor) throw DimensionError("preference is not an attractor");
  return FeatureModel(layout, {pref}).features(s, refs)[0];
}

inline double repeller_feature(const StateLayout& layout, const State& s, const Preference& pref, const References& refs) {
  if (pref.kind != PreferenceKind::repeller) throw DimensionError("preference is not a repeller");
  return FeatureModel(layout, {pref}).features(s, refs)[0];
}

inline Vector feature_vector(const FeatureModel& model, const State& s, const References& refs) {
  return model.features(s, refs);
}

inline double value(const FeatureModel& model, const State& s, const Vector& theta, const References& refs) {
  return model.value(s, theta, refs);
}

inline double q_value(const FeatureModel& model, const ControlAffineDynamics& dyn, const State& s, const Action& a,
                      const Vector& theta, const References& refs, const Action* xi = nullptr) {
  State next = xi ? step_disturbed(dyn, s, a, *xi) : step(dyn, s, a);
  return model.value(next, theta, refs);
}

// Sparse state change g(s) a, summed over the nonzero action entries.
inline SparseVector input_delta(const std::vector<SparseVector>& columns, const Action& a) {
  SparseVector out;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (a[i] != 0.0)
      for (const SparseEntry& e : columns[i]) out.push_back({e.index, e.value * a[i]});
  return out;
}

}  // namespace pearl
