// Timing checks. Registered RUN_SERIAL so that concurrent tests do not skew them.

#include "pearl/bench.hpp"

#include <gtest/gtest.h>

using namespace pearl;

TEST(Bench, HootIsAnOrderSlowerThanDas) {
  const BenchResult r = bench_policy_timing("rendezvous", 5);
  double das = 0.0, hoot = 0.0;
  for (const auto& row : r.rows) {
    if (row.label == "das") das = row.ms_per_step;
    if (row.label == "hoot-grid") hoot = row.ms_per_step;
  }
  EXPECT_GE(hoot, 10.0 * das);
}

TEST(Bench, FeatureCostIsLinearInStateSize) {
  const BenchResult r = bench_feature_scaling();
  ASSERT_TRUE(r.power.has_value());
  EXPECT_LE(r.power->exponent, 1.2);
}
