#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vistatest {

// Acceleration/deceleration capability given as jerk-limited ramp profiles.
struct JerkLimitedProfile {
  double a_max = 0.0;
  double j_accel_up = 0.0;
  double j_accel_down = 0.0;
  double d_max = 0.0;
  double j_decel_up = 0.0;
  double j_decel_down = 0.0;
  std::optional<double> v_cap;
};

// Capability given as first-order laws: braking dv/dt = -decel_gain * v,
// acceleration dv/dt = (ramp_slope * min(ramp_saturation, t) + gain_offset) * (v_limit - v).
struct OdeProfile {
  double decel_gain = 4.0;
  double ramp_slope = 0.6;
  double ramp_saturation = 4.0;
  double gain_offset = 1.0;
  double v_limit = 22.2;
  double stop_speed = 0.01;
};

// Capability given as measured lookup tables, bilinear interpolation inside
// the grid and clamped extrapolation outside it.
struct TableProfile {
  std::vector<double> brake_speeds;
  std::vector<double> brake_dists;
  std::vector<double> speeds;
  std::vector<double> dists;
  std::vector<std::vector<double>> at;  // [speed index][dist index]
  std::vector<std::vector<double>> av;
  std::map<std::pair<double, double>, double> partial_overrides;
  double nominal_rate = 1.5;
};

struct AccelReach {
  double time = 0.0;
  double speed = 0.0;
};

enum class CommandMode { brake_to_stop, accelerate, hold, track_speed };

std::string to_string(CommandMode m);
CommandMode command_mode_from_string(const std::string& s);

// target is a plan distance for accelerate and a speed for track_speed.
struct KinematicCommand {
  CommandMode mode = CommandMode::hold;
  std::optional<double> target;
};

bool same_command(const KinematicCommand& a, const KinematicCommand& b);

struct PlanPhase {
  double dur = 0.0;
  double j = 0.0;
  double a0 = 0.0;
  double v0 = 0.0;
  double x0 = 0.0;
};

// One planned maneuver, evaluable in closed form at any time.
struct MotionPlan {
  enum class Kind { cruise, jerk_phases, ode_accel, ode_brake, table_brake, table_accel };
  Kind kind = Kind::cruise;
  std::vector<PlanPhase> phases;
  double total_time = 0.0;
  double total_dist = 0.0;
  double terminal_v = 0.0;
  double cruise_v = 0.0;  // speed held after the plan completes
  double p0 = 0.0;        // law parameter: start speed (ode, table)
  double p1 = 0.0;        // law parameter: decel rate (table brake) / target speed
};

struct EvalPoint {
  double v = 0.0;
  double x = 0.0;
};

struct KinematicState {
  double v = 0.0;
  KinematicCommand active{CommandMode::hold, std::nullopt};
  bool has_plan = false;
  MotionPlan plan;
  double t_in = 0.0;
  double acc_x = 0.0;  // integrated distance for incremental (table) plans
};

struct StepResult {
  double v = 0.0;
  double dx = 0.0;
};

class ADFunctions {
 public:
  explicit ADFunctions(JerkLimitedProfile p, std::string name = "jerk-limited");
  explicit ADFunctions(OdeProfile p, std::string name = "ode");
  explicit ADFunctions(TableProfile p, std::string name = "table");

  // Known presets: apollo-like, autoware-like, lgsvl-ode, carla-empirical.
  static ADFunctions preset(const std::string& name);
  static std::vector<std::string> preset_names();

  const std::string& name() const { return name_; }

  double braking_distance(double v) const;
  double braking_partial(double v, double v_target) const;
  AccelReach accel_reach(double v, double x) const;

  double v_cap() const;
  double speed_for_braking_distance(double x, double tol = 1e-6) const;
  double accel_distance_to_speed(double v, double v_target) const;
  double accel_time_to_speed(double v, double v_target) const;

  MotionPlan plan_brake(double v) const;
  MotionPlan plan_accel_over(double v, double dist) const;
  MotionPlan plan_accel_free(double v) const;
  MotionPlan plan_track(double v, double target) const;

  EvalPoint eval(const MotionPlan& plan, double t) const;
  double time_at_distance(const MotionPlan& plan, double dist) const;

  StepResult step(KinematicState& state, const KinematicCommand& cmd, double dt) const;

 private:
  std::variant<JerkLimitedProfile, OdeProfile, TableProfile> profile_;
  std::string name_;
};

struct CapabilityGrid {
  std::vector<double> speeds;
  std::vector<double> dists;
};

struct StrictnessIssue {
  std::string what;
};

struct MonotonicityViolation {
  std::string quantity;  // "B", "AT_v", "AT_x", "AV_v", "AV_x"
  double v_low = 0.0;
  double v_high = 0.0;
  double x = 0.0;
  double val_low = 0.0;
  double val_high = 0.0;
  double delta = 0.0;
};

struct AdditivityEntry {
  double v = 0.0;
  double v_target = 0.0;
  double deviation = 0.0;
};

struct RealismFlag {
  std::string quantity;  // "decel" or "accel"
  double v = 0.0;
  std::optional<double> x;
  double rate = 0.0;
};

struct CapabilityOptions {
  double monotonicity_tol = 0.05;
  double decel_flag = 7.0;
  double accel_flag = 4.0;
};

struct CapabilityReport {
  std::vector<StrictnessIssue> strictness;
  std::vector<MonotonicityViolation> monotonicity;
  std::vector<AdditivityEntry> additivity;
  double additivity_max = 0.0;
  double additivity_arg_v = 0.0;
  double additivity_arg_vt = 0.0;
  std::vector<RealismFlag> realism;
};

CapabilityReport check_capability(const ADFunctions& ad, const CapabilityGrid& grid,
                                  const CapabilityOptions& options = {});

struct EmpiricalOptions {
  double step = 0.1;
  double bound = 400.0;
  double dt = 0.01;
};

// Finds the smallest probed obstacle distance at which the black-box stopping
// run ends short of the obstacle.
double estimate_braking_distance(const std::function<bool(double)>& stops_short,
                                 const EmpiricalOptions& options = {});

std::function<bool(double)> make_stopping_probe(const ADFunctions& ad, double v, double dt = 0.01);

// Raises the cruise speed limit step by step until the run covers x, and
// reports the time and speed at which x was covered.
AccelReach estimate_accel_reach(
    const std::function<std::optional<AccelReach>(double)>& cruise_probe, double v, double v_max,
    const EmpiricalOptions& options = {});

std::function<std::optional<AccelReach>(double)> make_cruise_probe(const ADFunctions& ad, double v,
                                                                   double x, double dt = 0.01);

}  // namespace vistatest
