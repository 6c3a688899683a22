#include "vistatest/vehicle_dynamics.h"

#include <gtest/gtest.h>

#include <cmath>

namespace vistatest {
namespace {

const char* kJerkPresets[] = {"apollo-like", "autoware-like"};
const char* kAllPresets[] = {"apollo-like", "autoware-like", "lgsvl-ode", "carla-empirical"};

TEST(Strictness, HoldsOnAllPresets) {
  for (const char* name : kAllPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    EXPECT_DOUBLE_EQ(ad.braking_distance(0.0), 0.0) << name;
    for (double v : {0.0, 2.5, 7.0, 13.0, 20.0}) {
      AccelReach r = ad.accel_reach(v, 0.0);
      EXPECT_DOUBLE_EQ(r.time, 0.0) << name << " v=" << v;
      EXPECT_DOUBLE_EQ(r.speed, v) << name << " v=" << v;
    }
  }
}

TEST(Monotonicity, BrakingStrictlyIncreasingInSpeed) {
  for (const char* name : kAllPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    double prev = ad.braking_distance(0.0);
    for (double v = 0.5; v <= 25.0 + 1e-9; v += 0.5) {
      double b = ad.braking_distance(v);
      EXPECT_GT(b, prev) << name << " v=" << v;
      prev = b;
    }
  }
}

TEST(Monotonicity, JerkPresetsCleanOnFineGrid) {
  CapabilityGrid grid;
  for (double v = 0.0; v <= 25.0 + 1e-9; v += 0.5) grid.speeds.push_back(v);
  for (double x = 0.0; x <= 320.0 + 1e-9; x += 1.0) grid.dists.push_back(x);
  for (const char* name : kJerkPresets) {
    auto rep = check_capability(ADFunctions::preset(name), grid);
    EXPECT_TRUE(rep.strictness.empty()) << name;
    EXPECT_TRUE(rep.monotonicity.empty()) << name;
  }
}

TEST(Monotonicity, OdePresetFlagsMatchFrozenSet) {
  // Paper-grid check: the model reproduces the empirical table's adjacent-row
  // speed reversals at x = 10 and x = 20 between v = 0 and v = 5; the third
  // reversal lands at (0->5, x=30) where the measured data has it one row
  // lower. The full comparison against the published bold set lives in the
  // acceptance run.
  CapabilityGrid grid;
  for (double v = 0.0; v <= 20.0 + 1e-9; v += 5.0) grid.speeds.push_back(v);
  for (double x = 0.0; x <= 60.0 + 1e-9; x += 10.0) grid.dists.push_back(x);
  auto rep = check_capability(ADFunctions::preset("lgsvl-ode"), grid);
  std::vector<std::tuple<double, double, double>> got;
  for (const auto& m : rep.monotonicity) {
    EXPECT_EQ(m.quantity, "AV_v");
    got.emplace_back(m.v_low, m.v_high, m.x);
  }
  std::vector<std::tuple<double, double, double>> want{
      {0.0, 5.0, 10.0}, {0.0, 5.0, 20.0}, {0.0, 5.0, 30.0}};
  EXPECT_EQ(got, want);
}

TEST(Additivity, ApolloDeviationAtTwentyFifteen) {
  CapabilityGrid grid;
  for (double v = 0.0; v <= 20.0 + 1e-9; v += 5.0) grid.speeds.push_back(v);
  for (double x = 0.0; x <= 60.0 + 1e-9; x += 10.0) grid.dists.push_back(x);
  auto rep = check_capability(ADFunctions::preset("apollo-like"), grid);
  EXPECT_NEAR(rep.additivity_max, 11.3, 0.3);
  EXPECT_DOUBLE_EQ(rep.additivity_arg_v, 20.0);
  EXPECT_DOUBLE_EQ(rep.additivity_arg_vt, 15.0);
}

TEST(Realism, OdeMeanDecelerationFlagged) {
  CapabilityGrid grid;
  for (double v = 0.0; v <= 20.0 + 1e-9; v += 5.0) grid.speeds.push_back(v);
  for (double x = 0.0; x <= 60.0 + 1e-9; x += 10.0) grid.dists.push_back(x);
  auto rep = check_capability(ADFunctions::preset("lgsvl-ode"), grid);
  bool forty = false;
  for (const auto& f : rep.realism)
    if (f.quantity == "decel" && f.v == 20.0) {
      EXPECT_NEAR(f.rate, 40.0, 0.5);
      forty = true;
    }
  EXPECT_TRUE(forty);
}

TEST(BrakingTables, FrozenPresetValues) {
  ADFunctions apollo = ADFunctions::preset("apollo-like");
  const double apollo_b[] = {0.0, 6.0987246287779895, 17.249798166393305,
                             31.750120146014382, 50.05020203426314};
  for (int i = 0; i < 5; ++i)
    EXPECT_NEAR(apollo.braking_distance(5.0 * i), apollo_b[i], 1e-9);
  EXPECT_NEAR(apollo.braking_distance(22.2), 59.39741386231254, 1e-9);

  ADFunctions autoware = ADFunctions::preset("autoware-like");
  const double autoware_b[] = {0.0, 4.8, 14.8, 29.8, 49.8};
  for (int i = 0; i < 5; ++i)
    EXPECT_NEAR(autoware.braking_distance(5.0 * i), autoware_b[i], 1e-9);
  EXPECT_NEAR(autoware.braking_distance(22.2), 60.184, 1e-9);
}

TEST(OdeBraking, ClosedFormQuarterSpeed) {
  ADFunctions ode = ADFunctions::preset("lgsvl-ode");
  for (double v = 0.0; v <= 22.2; v += 0.3)
    EXPECT_NEAR(ode.braking_distance(v), v / 4.0, 1e-3) << v;
}

TEST(AccelReach, SpotValues) {
  ADFunctions apollo = ADFunctions::preset("apollo-like");
  AccelReach a = apollo.accel_reach(0.0, 10.0);
  EXPECT_NEAR(a.time, 3.7, 0.2);
  EXPECT_NEAR(a.speed, 5.8, 0.2);

  ADFunctions ode = ADFunctions::preset("lgsvl-ode");
  AccelReach o = ode.accel_reach(0.0, 10.0);
  EXPECT_NEAR(o.time, 1.1, 0.1);
  EXPECT_NEAR(o.speed, 16.6, 0.2);
}

TEST(Inverse, SpeedForBrakingDistance) {
  for (const char* name : kAllPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    for (double x : {0.5, 3.0, 12.0, 40.0}) {
      double v = ad.speed_for_braking_distance(x);
      EXPECT_NEAR(ad.braking_distance(v), x, 1e-3) << name << " x=" << x;
    }
  }
}

TEST(PartialBraking, ConsistentWithFullStops) {
  for (const char* name : kJerkPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    // Slowing to v' and then stopping covers at least the direct stop.
    for (double v : {10.0, 15.0, 20.0}) {
      for (double vt : {0.0, 5.0, v - 2.0}) {
        double partial = ad.braking_partial(v, vt);
        EXPECT_GT(partial, 0.0) << name;
        EXPECT_GE(partial + ad.braking_distance(vt) + 1e-9, ad.braking_distance(v)) << name;
      }
      EXPECT_NEAR(ad.braking_partial(v, 0.0), ad.braking_distance(v), 1e-9) << name;
    }
  }
}

TEST(TickIntegration, BrakeMatchesAnalyticDistance) {
  const double dt = 0.1;
  for (const char* name : kAllPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    for (double v : {2.5, 7.0, 12.5, 20.0}) {
      KinematicState st;
      st.v = v;
      double sum = 0.0;
      KinematicCommand brake{CommandMode::brake_to_stop, std::nullopt};
      for (int k = 0; k < 4000 && st.v > 0.005; ++k) sum += ad.step(st, brake, dt).dx;
      EXPECT_NEAR(sum, ad.braking_distance(v), v * dt + 0.1) << name << " v=" << v;
    }
  }
}

TEST(TickIntegration, AccelerateOverDistanceMatchesAnalyticTime) {
  const double dt = 0.1;
  for (const char* name : kAllPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    for (double v : {0.0, 5.0, 10.0}) {
      for (double x : {10.0, 30.0, 60.0}) {
        AccelReach r = ad.accel_reach(v, x);
        KinematicState st;
        st.v = v;
        KinematicCommand cmd{CommandMode::accelerate, x};
        double sum = 0.0;
        int ticks = 0;
        while (sum < x && ticks < 4000) {
          sum += ad.step(st, cmd, dt).dx;
          ++ticks;
        }
        EXPECT_NEAR(ticks * dt, r.time, 2.0 * dt) << name << " v=" << v << " x=" << x;
      }
    }
  }
}

TEST(Plans, EvalEndpointsAgreeWithTotals) {
  for (const char* name : kJerkPresets) {
    ADFunctions ad = ADFunctions::preset(name);
    for (double v : {3.0, 9.0, 16.0}) {
      MotionPlan plan = ad.plan_brake(v);
      EvalPoint end = ad.eval(plan, plan.total_time);
      EXPECT_NEAR(end.x, plan.total_dist, 1e-6) << name;
      EXPECT_NEAR(end.v, plan.terminal_v, 1e-6) << name;
      EXPECT_NEAR(ad.time_at_distance(plan, plan.total_dist), plan.total_time, 1e-6) << name;
    }
  }
}

TEST(Plans, TimeAtDistanceToleratesEndpointResidue) {
  ADFunctions ad = ADFunctions::preset("apollo-like");
  MotionPlan plan = ad.plan_brake(8.0);
  double t = ad.time_at_distance(plan, plan.total_dist + 5e-10);
  EXPECT_DOUBLE_EQ(t, plan.total_time);
  EXPECT_THROW(ad.time_at_distance(plan, plan.total_dist + 1.0), std::runtime_error);
}

TEST(TablePreset, CarlaInterpolatesItsSeedNodes) {
  ADFunctions carla = ADFunctions::preset("carla-empirical");
  // Interior bilinear interpolation reproduces midpoints between node rows.
  AccelReach lo = carla.accel_reach(0.0, 10.0);
  AccelReach hi = carla.accel_reach(0.0, 20.0);
  AccelReach mid = carla.accel_reach(0.0, 15.0);
  EXPECT_NEAR(mid.speed, (lo.speed + hi.speed) / 2.0, 1e-9);
  EXPECT_NEAR(mid.time, (lo.time + hi.time) / 2.0, 1e-9);
  // Clamped extrapolation beyond the measured grid.
  AccelReach far = carla.accel_reach(0.0, 2000.0);
  EXPECT_GE(far.time, hi.time);
}

TEST(Empirical, EstimatorsRecoverAnalyticValues) {
  ADFunctions ad = ADFunctions::preset("apollo-like");
  EmpiricalOptions opts;
  double v0 = 12.0;
  auto stops_short = [&](double obstacle) { return ad.braking_distance(v0) < obstacle; };
  double est = estimate_braking_distance(stops_short, opts);
  EXPECT_NEAR(est, ad.braking_distance(v0), opts.step + 1e-9);
}

}  // namespace
}  // namespace vistatest
