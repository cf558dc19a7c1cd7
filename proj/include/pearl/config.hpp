#pragma once
// Task configuration and weights files (YAML), CSV output and scaling fits.

#include "pearl/learning.hpp"
#include "pearl/tasks.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pearl {

// A malformed configuration. `line` is 1-based; 0 when no position applies.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& msg, int line = 0)
      : Error(format(field, msg, line)), field_(field), line_(line) {}
  // The same error, prefixed with the file it came from.
  ConfigError(const std::string& source, const ConfigError& e)
      : Error(source + ": " + e.what()), field_(e.field_), line_(e.line_) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& msg, int line) {
    std::string s = line > 0 ? "line " + std::to_string(line) + ": " : "";
    return s + (field.empty() ? "" : field + ": ") + msg;
  }
  std::string field_;
  int line_;
};

// Scalar entries broadcast over the action dimension.
struct DisturbanceSpec {
  std::vector<double> mean{0.0};
  std::vector<double> stddev{0.0};
  bool operator==(const DisturbanceSpec&) const = default;

  GaussianDisturbance resolve(int da) const {
    auto expand = [da](const std::vector<double>& v, const char* what) {
      if (v.size() == 1) return Vector::Constant(da, v[0]).eval();
      if (static_cast<int>(v.size()) != da)
        throw DimensionError(std::string("disturbance ") + what + " has " + std::to_string(v.size()) + " entries for " +
                             std::to_string(da) + " actions");
      return Eigen::Map<const Vector>(v.data(), da).eval();
    };
    GaussianDisturbance d{expand(mean, "mean"), expand(stddev, "stddev")};
    d.validate();
    return d;
  }
};

struct TaskConfigFile {
  std::string task;
  Parameters parameters;
  Parameters train_parameters;  // overrides applied for training only
  std::optional<std::vector<Preference>> preferences;  // replaces the task's list when present
  std::vector<double> theta;                           // empty: the task's published weights
  PolicyConfig policy;
  TrainingConfig training;
  DisturbanceSpec disturbance;
  std::optional<DisturbanceSpec> planner_disturbance;
  bool estimate_disturbance = false;
  std::uint64_t seed = 1;
  int trials = 1;
  std::optional<double> horizon;
  std::vector<std::vector<double>> initial_states;
  bool operator==(const TaskConfigFile&) const = default;
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T read_as(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, "has the wrong type", line_of(n));
  }
}

inline std::vector<double> read_list(const YAML::Node& n, const std::string& field) {
  if (n.IsScalar()) return {read_as<double>(n, field)};
  if (!n.IsSequence()) throw ConfigError(field, "expected a number or a list of numbers", line_of(n));
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(read_as<double>(n[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& known) {
  if (!n.IsMap()) throw ConfigError(where, "expected a mapping", line_of(n));
  for (auto it = n.begin(); it != n.end(); ++it) {
    const std::string key = it->first.as<std::string>();
    if (!known.count(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown field", line_of(it->first));
  }
}

inline Preference read_preference(const YAML::Node& n, const std::string& where) {
  check_keys(n, where, {"name", "kind", "space", "axes", "agents", "target", "point", "reference", "partner", "offset", "beta"});
  Preference p;
  auto need = [&](const char* key) {
    if (!n[key]) throw ConfigError(where + "." + key, "is required", line_of(n));
    return n[key];
  };
  p.name = read_as<std::string>(need("name"), where + ".name");
  const std::string kind = read_as<std::string>(need("kind"), where + ".kind");
  if (kind == "attractor") p.kind = PreferenceKind::attractor;
  else if (kind == "repeller") p.kind = PreferenceKind::repeller;
  else throw ConfigError(where + ".kind", "must be attractor or repeller, got '" + kind + "'", line_of(n["kind"]));
  const std::string space = n["space"] ? read_as<std::string>(n["space"], where + ".space") : "position";
  if (space == "position") p.space = Space::position;
  else if (space == "velocity") p.space = Space::velocity;
  else throw ConfigError(where + ".space", "must be position or velocity, got '" + space + "'", line_of(n["space"]));
  const YAML::Node axes = need("axes");
  for (double a : read_list(axes, where + ".axes")) {
    if (a != std::floor(a) || a < 0) throw ConfigError(where + ".axes", "entries must be non-negative integers", line_of(axes));
    p.axes.push_back(static_cast<int>(a));
  }
  if (p.axes.empty()) throw ConfigError(where + ".axes", "must not be empty", line_of(axes));
  const YAML::Node agents = need("agents");
  if (agents.IsScalar()) {
    const std::string a = read_as<std::string>(agents, where + ".agents");
    p.agents = {a == "all" ? std::string("*") : a};
  } else {
    p.agents = read_as<std::vector<std::string>>(agents, where + ".agents");
  }
  if (p.agents.empty()) throw ConfigError(where + ".agents", "must name at least one agent", line_of(agents));
  const std::string target = read_as<std::string>(need("target"), where + ".target");
  if (target == "point") p.target = TargetKind::point;
  else if (target == "reference") p.target = TargetKind::reference;
  else if (target == "relation") p.target = TargetKind::relation;
  else if (target == "pairwise") p.target = TargetKind::pairwise;
  else if (target == "nearest") p.target = TargetKind::nearest;
  else throw ConfigError(where + ".target", "unknown target kind '" + target + "'", line_of(n["target"]));
  if (n["point"]) p.point = read_list(n["point"], where + ".point");
  if (n["reference"]) p.reference = read_as<std::string>(n["reference"], where + ".reference");
  if (n["partner"]) p.partner = read_as<std::string>(n["partner"], where + ".partner");
  if (n["offset"]) p.offset = read_list(n["offset"], where + ".offset");
  if (n["beta"]) p.beta = read_as<double>(n["beta"], where + ".beta");
  return p;
}

inline DisturbanceSpec read_disturbance(const YAML::Node& n, const std::string& where) {
  check_keys(n, where, {"mean", "stddev"});
  DisturbanceSpec d;
  if (n["mean"]) d.mean = read_list(n["mean"], where + ".mean");
  if (n["stddev"]) d.stddev = read_list(n["stddev"], where + ".stddev");
  if (d.mean.empty() || d.stddev.empty()) throw ConfigError(where, "mean and stddev must not be empty", line_of(n));
  for (double s : d.stddev)
    if (!(s >= 0.0)) throw ConfigError(where + ".stddev", "must be non-negative", line_of(n["stddev"]));
  return d;
}

inline Parameters read_parameters(const YAML::Node& ps, const std::string& where) {
  if (!ps.IsMap()) throw ConfigError(where, "expected a mapping", line_of(ps));
  Parameters out;
  for (auto it = ps.begin(); it != ps.end(); ++it) {
    const std::string key = it->first.as<std::string>(), field = where + "." + key;
    const YAML::Node v = it->second;
    if (v.IsSequence()) {
      out.values[key] = read_list(v, field);
    } else if (v.IsScalar()) {
      double d;
      if (YAML::convert<double>::decode(v, d)) out.values[key] = d;
      else out.values[key] = v.as<std::string>();
    } else {
      throw ConfigError(field, "must be a number, a string or a list of numbers", line_of(v));
    }
  }
  return out;
}

inline void emit_parameters(YAML::Emitter& e, const char* key, const Parameters& P);

inline const char* kind_name(PreferenceKind k) { return k == PreferenceKind::attractor ? "attractor" : "repeller"; }
inline const char* space_name(Space s) { return s == Space::position ? "position" : "velocity"; }
inline const char* target_name(TargetKind t) {
  switch (t) {
    case TargetKind::point: return "point";
    case TargetKind::reference: return "reference";
    case TargetKind::relation: return "relation";
    case TargetKind::pairwise: return "pairwise";
    case TargetKind::nearest: return "nearest";
  }
  return "?";
}

inline void emit_list(YAML::Emitter& e, const std::vector<double>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << x;
  e << YAML::EndSeq;
}

inline void emit_parameters(YAML::Emitter& e, const char* key, const Parameters& P) {
  e << YAML::Key << key << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : P.values) {
    e << YAML::Key << k << YAML::Value;
    if (auto d = std::get_if<double>(&v)) e << *d;
    else if (auto l = std::get_if<std::vector<double>>(&v)) emit_list(e, *l);
    else e << YAML::DoubleQuoted << std::get<std::string>(v);
  }
  e << YAML::EndMap;
}

}  // namespace detail

inline TaskConfigFile parse_task_config(const YAML::Node& root) {
  using namespace detail;
  check_keys(root, "", {"task", "parameters", "train_parameters", "preferences", "theta", "policy", "training", "disturbance",
                        "planner_disturbance", "estimate_disturbance", "seed", "trials", "horizon", "initial_states"});
  TaskConfigFile c;
  if (!root["task"]) throw ConfigError("task", "is required", line_of(root));
  c.task = read_as<std::string>(root["task"], "task");
  const auto names = task_names();
  if (std::find(names.begin(), names.end(), c.task) == names.end())
    throw ConfigError("task", "unknown task '" + c.task + "'", line_of(root["task"]));
  if (root["parameters"]) c.parameters = read_parameters(root["parameters"], "parameters");
  if (root["train_parameters"]) c.train_parameters = read_parameters(root["train_parameters"], "train_parameters");
  if (const YAML::Node ps = root["preferences"]) {
    if (!ps.IsSequence()) throw ConfigError("preferences", "expected a list", line_of(ps));
    std::vector<Preference> prefs;
    for (std::size_t i = 0; i < ps.size(); ++i) prefs.push_back(read_preference(ps[i], "preferences[" + std::to_string(i) + "]"));
    if (prefs.empty()) throw ConfigError("preferences", "must not be empty", line_of(ps));
    c.preferences = std::move(prefs);
  }
  if (root["theta"]) c.theta = read_list(root["theta"], "theta");
  if (const YAML::Node p = root["policy"]) {
    check_keys(p, "policy", {"method", "samples_per_axis", "hoot_levels", "hoot_branching", "apf_alpha"});
    if (p["method"]) {
      try {
        c.policy.method = parse_policy_method(read_as<std::string>(p["method"], "policy.method"));
      } catch (const DimensionError& e) {
        throw ConfigError("policy.method", e.what(), line_of(p["method"]));
      }
    }
    if (p["samples_per_axis"]) c.policy.samples_per_axis = read_as<int>(p["samples_per_axis"], "policy.samples_per_axis");
    if (p["hoot_levels"]) c.policy.hoot_levels = read_as<int>(p["hoot_levels"], "policy.hoot_levels");
    if (p["hoot_branching"]) c.policy.hoot_branching = read_as<int>(p["hoot_branching"], "policy.hoot_branching");
    if (p["apf_alpha"]) c.policy.apf_alpha = read_as<double>(p["apf_alpha"], "policy.apf_alpha");
    try {
      c.policy.validate();
    } catch (const DimensionError& e) {
      throw ConfigError("policy", e.what(), line_of(p));
    }
  }
  if (const YAML::Node t = root["training"]) {
    check_keys(t, "training", {"iterations", "samples_per_iteration", "gamma", "goal_radius", "n_mc", "margin", "intercept",
                               "eval_count", "eval_horizon"});
    TrainingConfig& tc = c.training;
    if (t["iterations"]) tc.iterations = read_as<int>(t["iterations"], "training.iterations");
    if (t["samples_per_iteration"]) tc.samples_per_iteration = read_as<int>(t["samples_per_iteration"], "training.samples_per_iteration");
    if (t["gamma"]) tc.gamma = read_as<double>(t["gamma"], "training.gamma");
    if (t["goal_radius"]) tc.goal_radius = read_as<double>(t["goal_radius"], "training.goal_radius");
    if (t["n_mc"]) tc.n_mc = read_as<int>(t["n_mc"], "training.n_mc");
    if (t["margin"]) tc.margin = read_as<double>(t["margin"], "training.margin");
    if (t["intercept"]) tc.intercept = read_as<bool>(t["intercept"], "training.intercept");
    if (t["eval_count"]) tc.eval_count = read_as<int>(t["eval_count"], "training.eval_count");
    if (t["eval_horizon"]) tc.eval_horizon = read_as<double>(t["eval_horizon"], "training.eval_horizon");
    try {
      tc.validate();
    } catch (const DimensionError& e) {
      throw ConfigError("training", e.what(), line_of(t));
    }
  }
  if (root["disturbance"]) c.disturbance = read_disturbance(root["disturbance"], "disturbance");
  if (root["planner_disturbance"]) c.planner_disturbance = read_disturbance(root["planner_disturbance"], "planner_disturbance");
  if (root["estimate_disturbance"]) c.estimate_disturbance = read_as<bool>(root["estimate_disturbance"], "estimate_disturbance");
  if (root["seed"]) c.seed = read_as<std::uint64_t>(root["seed"], "seed");
  if (root["trials"]) {
    c.trials = read_as<int>(root["trials"], "trials");
    if (c.trials < 1) throw ConfigError("trials", "must be positive", line_of(root["trials"]));
  }
  if (root["horizon"]) {
    c.horizon = read_as<double>(root["horizon"], "horizon");
    if (!(*c.horizon >= 0.0)) throw ConfigError("horizon", "must be non-negative", line_of(root["horizon"]));
  }
  if (const YAML::Node s = root["initial_states"]) {
    if (!s.IsSequence()) throw ConfigError("initial_states", "expected a list of states", line_of(s));
    for (std::size_t i = 0; i < s.size(); ++i)
      c.initial_states.push_back(read_list(s[i], "initial_states[" + std::to_string(i) + "]"));
  }
  return c;
}

inline TaskConfigFile parse_task_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.msg, e.mark.line + 1);
  }
  return parse_task_config(root);
}

inline TaskConfigFile load_task_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_task_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path, e);
  }
}

inline std::string serialize_task_config(const TaskConfigFile& c) {
  using namespace detail;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "task" << YAML::Value << c.task;
  if (!c.parameters.values.empty()) emit_parameters(e, "parameters", c.parameters);
  if (!c.train_parameters.values.empty()) emit_parameters(e, "train_parameters", c.train_parameters);
  if (c.preferences) {
    e << YAML::Key << "preferences" << YAML::Value << YAML::BeginSeq;
    for (const Preference& p : *c.preferences) {
      e << YAML::BeginMap;
      e << YAML::Key << "name" << YAML::Value << p.name;
      e << YAML::Key << "kind" << YAML::Value << kind_name(p.kind);
      e << YAML::Key << "space" << YAML::Value << space_name(p.space);
      e << YAML::Key << "axes" << YAML::Value << YAML::Flow << p.axes;
      e << YAML::Key << "agents" << YAML::Value;
      if (p.agents == std::vector<std::string>{"*"}) e << "all";
      else e << YAML::Flow << p.agents;
      e << YAML::Key << "target" << YAML::Value << target_name(p.target);
      if (!p.point.empty()) e << YAML::Key << "point" << YAML::Value, emit_list(e, p.point);
      if (!p.reference.empty()) e << YAML::Key << "reference" << YAML::Value << p.reference;
      if (!p.partner.empty()) e << YAML::Key << "partner" << YAML::Value << p.partner;
      if (!p.offset.empty()) e << YAML::Key << "offset" << YAML::Value, emit_list(e, p.offset);
      e << YAML::Key << "beta" << YAML::Value << p.beta;
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  if (!c.theta.empty()) e << YAML::Key << "theta" << YAML::Value, emit_list(e, c.theta);
  e << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "method" << YAML::Value << to_string(c.policy.method);
  e << YAML::Key << "samples_per_axis" << YAML::Value << c.policy.samples_per_axis;
  e << YAML::Key << "hoot_levels" << YAML::Value << c.policy.hoot_levels;
  e << YAML::Key << "hoot_branching" << YAML::Value << c.policy.hoot_branching;
  e << YAML::Key << "apf_alpha" << YAML::Value << c.policy.apf_alpha;
  e << YAML::EndMap;
  const TrainingConfig& t = c.training;
  e << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "iterations" << YAML::Value << t.iterations;
  e << YAML::Key << "samples_per_iteration" << YAML::Value << t.samples_per_iteration;
  e << YAML::Key << "gamma" << YAML::Value << t.gamma;
  e << YAML::Key << "goal_radius" << YAML::Value << t.goal_radius;
  e << YAML::Key << "n_mc" << YAML::Value << t.n_mc;
  e << YAML::Key << "margin" << YAML::Value << t.margin;
  e << YAML::Key << "intercept" << YAML::Value << t.intercept;
  e << YAML::Key << "eval_count" << YAML::Value << t.eval_count;
  e << YAML::Key << "eval_horizon" << YAML::Value << t.eval_horizon;
  e << YAML::EndMap;
  auto dist = [&](const char* key, const DisturbanceSpec& d) {
    e << YAML::Key << key << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mean" << YAML::Value, emit_list(e, d.mean);
    e << YAML::Key << "stddev" << YAML::Value, emit_list(e, d.stddev);
    e << YAML::EndMap;
  };
  dist("disturbance", c.disturbance);
  if (c.planner_disturbance) dist("planner_disturbance", *c.planner_disturbance);
  e << YAML::Key << "estimate_disturbance" << YAML::Value << c.estimate_disturbance;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "trials" << YAML::Value << c.trials;
  if (c.horizon) e << YAML::Key << "horizon" << YAML::Value << *c.horizon;
  if (!c.initial_states.empty()) {
    e << YAML::Key << "initial_states" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.initial_states) emit_list(e, s);
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

// Instantiate the task a configuration describes. Errors name the offending field.
inline Task build_task(const TaskConfigFile& c) {
  Task task;
  try {
    task = make_task(c.task, c.parameters);
  } catch (const DimensionError& e) {
    throw ConfigError("parameters", e.what());
  }
  if (c.preferences) {
    std::vector<Preference> prefs = *c.preferences;
    for (Preference& p : prefs)
      if (p.agents == std::vector<std::string>{"*"}) {
        p.agents.clear();
        for (const Body& b : task.layout.bodies()) p.agents.push_back(b.name);
      }
    if (prefs.size() != task.preferences.size()) {
      task.phases.clear();
      task.goal.preferences.clear();
      task.published_theta.resize(0);
    }
    task.preferences = std::move(prefs);
  }
  try {
    task.finalize();
  } catch (const DimensionError& e) {
    throw ConfigError("preferences", e.what());
  }
  return task;
}

// The configuration training runs on: parameters with train_parameters laid over them.
inline TaskConfigFile training_view(const TaskConfigFile& c) {
  TaskConfigFile t = c;
  for (const auto& [k, v] : c.train_parameters.values) t.parameters.values[k] = v;
  t.train_parameters.values.clear();
  return t;
}

// Weights precedence: explicit file, then the config's theta, then the task's published weights.
inline Vector config_theta(const TaskConfigFile& c, const Task& task) {
  if (!c.theta.empty()) return Eigen::Map<const Vector>(c.theta.data(), static_cast<Eigen::Index>(c.theta.size()));
  if (task.published_theta.size() == task.size()) return task.published_theta;
  throw ConfigError("theta", "task '" + task.name + "' has no default weights; pass a weights file");
}

inline std::vector<State> config_initial_states(const TaskConfigFile& c, const Task& task, int count, std::uint64_t seed) {
  std::vector<State> out;
  if (!c.initial_states.empty()) {
    for (std::size_t i = 0; i < c.initial_states.size(); ++i) {
      const auto& v = c.initial_states[i];
      if (static_cast<int>(v.size()) != task.layout.state_dim())
        throw ConfigError("initial_states[" + std::to_string(i) + "]", "has " + std::to_string(v.size()) +
                                                                         " entries, task state has " +
                                                                         std::to_string(task.layout.state_dim()));
      out.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return out;
  }
  if (!task.sample_initial) throw ConfigError("initial_states", "task '" + task.name + "' needs explicit initial states");
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
    out.push_back(task.sample_initial(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights files

struct WeightsFile {
  std::string task;
  std::vector<double> theta;
  double intercept = 0.0;
  std::uint64_t seed = 0;
  TrainingConfig training;
  std::size_t selected = 0;
  struct Trial {
    std::vector<double> theta;
    double success_rate = 0.0;
    double mean_duration = 0.0;
    std::vector<double> theta_norms;
    std::string error;
    bool operator==(const Trial&) const = default;
  };
  std::vector<Trial> trials;
  bool operator==(const WeightsFile&) const = default;
};

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline WeightsFile make_weights_file(const std::string& task, std::uint64_t seed, const TrainingConfig& cfg,
                                     const TrainingReport& rep) {
  WeightsFile w;
  w.task = task;
  w.theta = to_std(rep.theta);
  w.intercept = rep.trials.at(rep.selected).training.intercept;
  w.seed = seed;
  w.training = cfg;
  w.selected = rep.selected;
  for (const auto& t : rep.trials)
    w.trials.push_back({to_std(t.training.theta), t.score.success_rate, t.score.mean_duration, t.training.theta_norms, t.error});
  return w;
}

inline std::string serialize_weights(const WeightsFile& w) {
  using detail::emit_list;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "task" << YAML::Value << w.task;
  e << YAML::Key << "theta" << YAML::Value, emit_list(e, w.theta);
  e << YAML::Key << "intercept" << YAML::Value << w.intercept;
  e << YAML::Key << "seed" << YAML::Value << w.seed;
  e << YAML::Key << "selected" << YAML::Value << w.selected;
  e << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "iterations" << YAML::Value << w.training.iterations;
  e << YAML::Key << "samples_per_iteration" << YAML::Value << w.training.samples_per_iteration;
  e << YAML::Key << "gamma" << YAML::Value << w.training.gamma;
  e << YAML::Key << "goal_radius" << YAML::Value << w.training.goal_radius;
  e << YAML::Key << "n_mc" << YAML::Value << w.training.n_mc;
  e << YAML::Key << "margin" << YAML::Value << w.training.margin;
  e << YAML::Key << "intercept" << YAML::Value << w.training.intercept;
  e << YAML::Key << "eval_count" << YAML::Value << w.training.eval_count;
  e << YAML::Key << "eval_horizon" << YAML::Value << w.training.eval_horizon;
  e << YAML::EndMap;
  e << YAML::Key << "trials" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : w.trials) {
    e << YAML::BeginMap;
    e << YAML::Key << "theta" << YAML::Value, emit_list(e, t.theta);
    e << YAML::Key << "success_rate" << YAML::Value << t.success_rate;
    // .inf is how YAML spells an infinite duration (no successes)
    e << YAML::Key << "mean_duration" << YAML::Value << t.mean_duration;
    e << YAML::Key << "theta_norms" << YAML::Value, emit_list(e, t.theta_norms);
    if (!t.error.empty()) e << YAML::Key << "error" << YAML::Value << t.error;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

inline WeightsFile parse_weights(const YAML::Node& root) {
  using namespace detail;
  if (!root.IsMap()) throw ConfigError("", "weights file must be a mapping", line_of(root));
  WeightsFile w;
  if (!root["theta"]) throw ConfigError("theta", "is required", line_of(root));
  w.theta = read_list(root["theta"], "theta");
  if (root["task"]) w.task = read_as<std::string>(root["task"], "task");
  if (root["intercept"]) w.intercept = read_as<double>(root["intercept"], "intercept");
  if (root["seed"]) w.seed = read_as<std::uint64_t>(root["seed"], "seed");
  if (root["selected"]) w.selected = read_as<std::size_t>(root["selected"], "selected");
  if (const YAML::Node t = root["training"]) {
    TrainingConfig& tc = w.training;
    if (t["iterations"]) tc.iterations = read_as<int>(t["iterations"], "training.iterations");
    if (t["samples_per_iteration"]) tc.samples_per_iteration = read_as<int>(t["samples_per_iteration"], "training.samples_per_iteration");
    if (t["gamma"]) tc.gamma = read_as<double>(t["gamma"], "training.gamma");
    if (t["goal_radius"]) tc.goal_radius = read_as<double>(t["goal_radius"], "training.goal_radius");
    if (t["n_mc"]) tc.n_mc = read_as<int>(t["n_mc"], "training.n_mc");
    if (t["margin"]) tc.margin = read_as<double>(t["margin"], "training.margin");
    if (t["intercept"]) tc.intercept = read_as<bool>(t["intercept"], "training.intercept");
    if (t["eval_count"]) tc.eval_count = read_as<int>(t["eval_count"], "training.eval_count");
    if (t["eval_horizon"]) tc.eval_horizon = read_as<double>(t["eval_horizon"], "training.eval_horizon");
  }
  if (const YAML::Node ts = root["trials"]) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string f = "trials[" + std::to_string(i) + "]";
      WeightsFile::Trial t;
      t.theta = read_list(ts[i]["theta"], f + ".theta");
      t.success_rate = read_as<double>(ts[i]["success_rate"], f + ".success_rate");
      t.mean_duration = read_as<double>(ts[i]["mean_duration"], f + ".mean_duration");
      if (ts[i]["theta_norms"]) t.theta_norms = read_list(ts[i]["theta_norms"], f + ".theta_norms");
      if (ts[i]["error"]) t.error = read_as<std::string>(ts[i]["error"], f + ".error");
      w.trials.push_back(std::move(t));
    }
  }
  return w;
}

inline WeightsFile load_weights(const std::string& path) {
  try {
    return parse_weights(YAML::LoadFile(path));
  } catch (const YAML::BadFile&) {
    throw ConfigError("", "cannot open weights file '" + path + "'");
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", path + ": " + e.msg, e.mark.line + 1);
  }
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), width_(header.size()) {
    write(header);
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw DimensionError("csv row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(width_));
    write(cells);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    for (double v : values) cells.push_back(csv_number(v));
    row(cells);
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ostream& out_;
  std::size_t width_;
};

// Header-addressed table as read back from a CSV file.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DimensionError("csv has no column '" + name + "'");
  }
  double number(std::size_t row, const std::string& name) const { return std::stod(rows.at(row).at(column(name))); }
  const std::string& text(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw DimensionError("csv is empty");
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

// t, state coordinates, action, V(s), planning time (ms), realised disturbance.
inline std::vector<std::string> trajectory_header(const Task& task) {
  std::vector<std::string> h{"t"};
  for (int c = 0; c < task.layout.state_dim(); ++c) h.push_back(task.layout.coordinate_name(c));
  for (int i = 0; i < task.action_dim(); ++i) h.push_back("a" + std::to_string(i));
  h.push_back("V");
  h.push_back("plan_ms");
  for (int i = 0; i < task.action_dim(); ++i) h.push_back("xi" + std::to_string(i));
  return h;
}

inline void write_trajectory_csv(std::ostream& out, const Task& task, const Trajectory& tr) {
  CsvWriter w(out, trajectory_header(task));
  for (const auto& st : tr.steps) {
    std::vector<double> r{st.t};
    r.insert(r.end(), st.s.data(), st.s.data() + st.s.size());
    r.insert(r.end(), st.a.data(), st.a.data() + st.a.size());
    r.push_back(st.value);
    r.push_back(st.plan_ms);
    r.insert(r.end(), st.xi.data(), st.xi.data() + st.xi.size());
    w.row(r);
  }
}

// ---------------------------------------------------------------------------
// Scaling fits

struct LinearFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("linear fit needs at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericError("linear fit: all x values equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return f;
}

// y = a x^k fitted in log-log space; r2 is that of the log fit.
struct PowerFit {
  double exponent = 0.0, coefficient = 0.0, r2 = 0.0;
};

inline PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericError("power-law fit needs positive data");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const LinearFit l = fit_linear(lx, ly);
  return {l.slope, std::exp(l.intercept), l.r2};
}

}  // namespace pearl
