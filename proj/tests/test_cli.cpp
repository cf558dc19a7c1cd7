#include "pearl/analysis.hpp"
#include "pearl/config.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace pearl;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + PEARL_CLI_PATH + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pearl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Drop a named column (timing) before comparing two CSV files.
std::string without_column(const fs::path& p, const std::string& name) {
  std::ifstream in(p);
  const CsvTable t = read_csv(in);
  const std::size_t skip = t.column(name);
  std::string out;
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      if (i != skip) out += r[i] + ",";
    out += "\n";
  }
  return out;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fly"), 2);
  EXPECT_EQ(run("plan --config cargo --out /tmp/x --policy magic"), 2);
  EXPECT_EQ(run("plan --config no-such-preset --out /tmp/x"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, MalformedConfigExitsTwo) {
  const fs::path d = scratch("badcfg");
  write(d / "bad.cfg", "task: cargo\nseeed: 1\n");
  EXPECT_EQ(run("plan --config " + (d / "bad.cfg").string() + " --out " + (d / "o").string()), 2);
  write(d / "dims.cfg", "task: cargo\ntheta: [-1, -2]\n");
  EXPECT_EQ(run("plan --config " + (d / "dims.cfg").string() + " --out " + (d / "o").string()), 2);
}

TEST(Cli, PlanWritesSchemaStableDeterministicOutput) {
  const fs::path a = scratch("plan_a"), b = scratch("plan_b");
  const std::string args = "plan --config cargo --trials 2 --horizon 1 --seed 5 --out ";
  ASSERT_EQ(run(args + a.string(), "PEARL_THREADS=2"), 0);
  ASSERT_EQ(run(args + b.string(), "PEARL_THREADS=1"), 0);
  for (const std::string f : {"trajectory_0.csv", "trajectory_1.csv"}) {
    ASSERT_TRUE(fs::exists(a / f));
    EXPECT_EQ(without_column(a / f, "plan_ms"), without_column(b / f, "plan_ms")) << f;
  }
  EXPECT_EQ(without_column(a / "summary.csv", "mean_plan_ms"), without_column(b / "summary.csv", "mean_plan_ms"));
  std::ifstream in(a / "trajectory_0.csv");
  const CsvTable t = read_csv(in);
  EXPECT_EQ(t.header.size(), 1u + 10 + 3 + 1 + 1 + 3);
  EXPECT_EQ(t.rows.size(), 50u);
  std::ifstream sin(a / "summary.csv");
  const CsvTable s = read_csv(sin);
  EXPECT_EQ(s.rows.size(), 2u);
  EXPECT_NO_THROW(s.column("final_goal_distance"));
  EXPECT_NO_THROW(s.column("goal_distance"));
}

TEST(Cli, PlanBaselinePolicies) {
  const fs::path d = scratch("baselines");
  EXPECT_EQ(run("plan --config obstacles --policy apf --trials 1 --horizon 1 --out " + d.string()), 0);
  EXPECT_EQ(run("plan --config pursuit --policy boids --trials 1 --horizon 0.2 --out " + d.string()), 0);
  EXPECT_EQ(run("plan --config cargo --policy boids --trials 1 --horizon 0.2 --out " + d.string()), 2);
  EXPECT_EQ(run("plan --config rendezvous --policy hoot-grid --trials 1 --horizon 0.1 --out " + d.string()), 0);
}

TEST(Cli, TrainIsDeterministicAndFeedsPlan) {
  const fs::path d = scratch("train");
  write(d / "di.cfg",
        "task: double-integrator\ntraining:\n  iterations: 30\n  samples_per_iteration: 50\n  goal_radius: 0.3\n"
        "  margin: 0.5\n  eval_count: 5\n  eval_horizon: 5\n  n_mc: 1\n");
  const std::string cfg = (d / "di.cfg").string();
  ASSERT_EQ(run("train --config " + cfg + " --seed 3 --out " + (d / "w1.yaml").string()), 0);
  ASSERT_EQ(run("train --config " + cfg + " --seed 3 --out " + (d / "w2.yaml").string()), 0);
  EXPECT_EQ(slurp(d / "w1.yaml"), slurp(d / "w2.yaml"));
  const WeightsFile w = load_weights((d / "w1.yaml").string());
  EXPECT_EQ(w.task, "double-integrator");
  EXPECT_EQ(w.theta.size(), 2u);
  EXPECT_EQ(w.seed, 3u);
  ASSERT_EQ(run("train --config " + cfg + " --seed 3 --trials 2 --out " + (d / "w3.yaml").string(), "PEARL_THREADS=2"), 0);
  EXPECT_EQ(load_weights((d / "w3.yaml").string()).trials.size(), 2u);
  EXPECT_EQ(run("plan --config " + cfg + " --weights " + (d / "w1.yaml").string() + " --horizon 1 --out " +
                (d / "plan").string()),
            0);
  EXPECT_TRUE(fs::exists(d / "plan" / "trajectory_0.csv"));
}

TEST(Cli, SingularTrainingExitsThree) {
  const fs::path d = scratch("singular");
  write(d / "dup.cfg",
        "task: double-integrator\npreferences:\n"
        "  - {name: a, kind: attractor, axes: [0], agents: point, target: point, point: [0]}\n"
        "  - {name: b, kind: attractor, axes: [0], agents: point, target: point, point: [0]}\n"
        "training:\n  iterations: 5\n  samples_per_iteration: 20\n  eval_count: 2\n");
  EXPECT_EQ(run("train --config " + (d / "dup.cfg").string() + " --out " + (d / "w.yaml").string()), 3);
}

TEST(Cli, NonFiniteStateExitsThree) {
  const fs::path d = scratch("nonfinite");
  write(d / "huge.cfg", "task: double-integrator\ninitial_states:\n  - [1e308, 1e308]\ntheta: [-1, -1]\n");
  EXPECT_EQ(run("plan --config " + (d / "huge.cfg").string() + " --horizon 1 --out " + (d / "o").string()), 3);
}

TEST(Cli, AnalyzeWritesCriticalPoints) {
  const fs::path d = scratch("analyze");
  ASSERT_EQ(run("analyze --c 100 --d 0.5,2 --out " + (d / "a.csv").string()), 0);
  std::ifstream in(d / "a.csv");
  const CsvTable t = read_csv(in);
  ASSERT_FALSE(t.rows.empty());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double x = t.number(r, "x");
    EXPECT_LT(std::abs(dvx(x, {t.number(r, "c"), t.number(r, "d")})), 1e-5);
  }
  EXPECT_EQ(run("analyze --c -1 --out " + (d / "b.csv").string()), 2);
}

TEST(Cli, BenchPolicyTiming) {
  const fs::path d = scratch("bench");
  ASSERT_EQ(run("bench policy-timing --out " + (d / "b.csv").string()), 0);
  std::ifstream in(d / "b.csv");
  const CsvTable t = read_csv(in);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.text(0, "label"), "das");
  EXPECT_GT(t.number(2, "ms_per_step"), t.number(1, "ms_per_step"));
  EXPECT_EQ(run("bench warp-speed --out " + (d / "c.csv").string()), 2);
}
