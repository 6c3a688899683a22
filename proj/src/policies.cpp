#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vistatest/sim_core.h"

namespace vistatest {

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::worst_case_safe: return "worst-case-safe";
    case PolicyKind::overcautious: return "overcautious";
    case PolicyKind::overoptimistic: return "overoptimistic";
    case PolicyKind::external: return "external";
  }
  throw std::logic_error("unknown policy kind");
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "worst-case-safe") return PolicyKind::worst_case_safe;
  if (s == "overcautious") return PolicyKind::overcautious;
  if (s == "overoptimistic") return PolicyKind::overoptimistic;
  if (s == "external") return PolicyKind::external;
  throw std::invalid_argument("unknown policy kind: " + s);
}

namespace {

double arriving_conflict_distance(const Vista& vista) {
  if (vista.arriving.empty()) return 1e18;
  double best = 1e18;
  for (const auto& av : vista.arriving) best = std::min(best, av.distance_to_conflict);
  return best;
}

class ReferencePolicy : public EgoPolicy {
 public:
  explicit ReferencePolicy(PolicyKind kind) : kind_(kind) {}

  KinematicCommand decide(const Vista& vista, const PolicyEnv& env) override;

 private:
  bool commit_ready(const Vista& vista, const PolicyEnv& env);
  KinematicCommand caution(const Vista& vista, const PolicyEnv& env);
  KinematicCommand committed_step(const Vista& vista, const PolicyEnv& env);

  PolicyKind kind_;
  bool committed_ = false;
  bool phase2_ = false;
  bool phase2_decided_ = false;
  bool phase2_braking_ = false;
  double move_speed_ = 0.0;
  double commit_target_ = 0.0;
  bool brake_latched_ = false;
  bool lc_restart_ = false;
};

bool ReferencePolicy::commit_ready(const Vista& vista, const PolicyEnv& env) {
  const ADFunctions& ad = env.ad;
  const PolicyParams& mg = env.margins;
  const double v = vista.ego.speed;
  const double c = vista.ego.chainage;
  const double dist_entry = std::max(0.0, env.zone_entry - c);
  const double dist_exit = std::max(0.0, env.zone_exit - c);
  const bool optimistic = kind_ == PolicyKind::overoptimistic;
  const double scale = optimistic ? mg.opt_factor : 1.0;
  const double mu = optimistic ? 0.0 : mg.mu;
  const double xa_live = arriving_conflict_distance(vista);

  // Free room beyond the zone, or beyond the vehicle itself once its front
  // has passed the zone: a late commitment must fit its own stopping
  // distance, not the distance measured from a line it already crossed.
  auto front_slack = [&](bool adjacent) {
    return (c + nearest_front_gap(vista, adjacent)) - std::max(c, env.zone_exit);
  };
  auto xf_need = [&](double arrival_speed) {
    double need = scale * ad.braking_distance(arrival_speed) + mu;
    if (!optimistic) need = std::max(need, mg.xf_floor);
    return need;
  };

  switch (env.ctx.kind) {
    case VistaKind::merging: {
      AccelReach r = ad.accel_reach(v, dist_entry);
      double need_xa =
          scale * (ad.braking_distance(env.ctx.vl) + env.ctx.vl * r.time) + mu;
      if (xa_live < need_xa) return false;
      if (front_slack(false) < xf_need(r.speed)) return false;
      commit_target_ = dist_entry;
      return true;
    }
    case VistaKind::lane_change: {
      // The crossover to the target lane sits at a fixed arclength; once the
      // vehicle has driven past it on its own lane the maneuver is forfeit.
      if (c > env.zone_entry + 1e-9) return false;
      // A rolling vehicle changes lanes at its current speed. From a
      // standstill the maneuver restarts instead: accelerate along the
      // change path and merge at whatever speed that yields.
      bool restart = v <= 1e-6;
      double entry_speed = v;
      double traverse_time;
      if (restart) {
        AccelReach r = ad.accel_reach(v, dist_entry);
        entry_speed = r.speed;
        traverse_time = r.time;
      } else {
        traverse_time = dist_entry / v;
      }
      double need_xa =
          scale * (env.ctx.vl * traverse_time + ad.braking_distance(env.ctx.vl)) + mu;
      if (xa_live < need_xa) return false;
      if (front_slack(true) < xf_need(entry_speed)) return false;
      commit_target_ = restart ? dist_entry : 0.0;
      lc_restart_ = restart;
      return true;
    }
    case VistaKind::crossing_yield: {
      AccelReach r = ad.accel_reach(v, dist_exit);
      double need_xa = scale * (env.ctx.vl * r.time) + mu;
      double xa_entry = xa_live - env.ctx.cd / 2.0;  // anchor at the arriving zone entry
      if (xa_entry < need_xa) return false;
      if (front_slack(false) < xf_need(r.speed)) return false;
      commit_target_ = dist_exit;
      return true;
    }
    case VistaKind::crossing_light: {
      if (!optimistic) {
        AccelReach r_entry = ad.accel_reach(v, dist_entry);
        AccelReach r_exit = ad.accel_reach(v, dist_exit);
        double entry_budget = env.schedule.red_at - env.time;
        double exit_budget = env.schedule.side_green_at - env.time - mg.tail_reserve;
        double tail = env.vehicle_length / std::max(r_exit.speed, 0.1);
        if (r_entry.time > entry_budget) return false;
        if (r_exit.time + tail > exit_budget) return false;
        if (front_slack(false) < xf_need(r_exit.speed)) return false;
      } else {
        AccelReach r_exit = ad.accel_reach(v, dist_exit);
        if (front_slack(false) < xf_need(r_exit.speed)) return false;
      }
      commit_target_ = dist_exit;
      return true;
    }
  }
  return false;
}

KinematicCommand ReferencePolicy::committed_step(const Vista& vista, const PolicyEnv& env) {
  const ADFunctions& ad = env.ad;
  const PolicyParams& mg = env.margins;
  const double v = vista.ego.speed;
  const double c = vista.ego.chainage;
  double boundary =
      env.ctx.kind == VistaKind::merging || env.ctx.kind == VistaKind::lane_change
          ? env.zone_entry
          : env.zone_exit;

  // The surrounding traffic reacts to the lane switch only once it is
  // registered in the scene. Until then keep issuing the overt maneuver
  // command; the repositioning gap can only be read off the target lane.
  if (env.ctx.kind == VistaKind::lane_change && !vista.ego.committed && !phase2_ &&
      c >= boundary - 1e-9)
    return {CommandMode::accelerate, std::nullopt};

  if (!phase2_ && c >= boundary - 1e-9) phase2_ = true;

  if (!phase2_) {
    if (env.ctx.kind == VistaKind::lane_change && !lc_restart_)
      return {CommandMode::hold, std::nullopt};
    return {CommandMode::accelerate, commit_target_};
  }

  if (!phase2_decided_) {
    phase2_decided_ = true;
    if (ad.braking_distance(v) >= env.vehicle_length + 1.0) {
      phase2_braking_ = true;
    } else {
      double gap = nearest_front_gap(vista, false);
      double d = std::min(gap - mg.stop_margin, mg.move_cap);
      d = std::max(d, 0.5);
      double lo = v, hi = ad.v_cap();
      if (ad.accel_distance_to_speed(v, hi) + ad.braking_distance(hi) <= d) {
        move_speed_ = hi;
      } else {
        for (int i = 0; i < 200 && hi - lo > 1e-9; ++i) {
          double mid = 0.5 * (lo + hi);
          double reach = ad.accel_distance_to_speed(v, mid) + ad.braking_distance(mid);
          if (reach <= d) lo = mid; else hi = mid;
        }
        move_speed_ = lo;
      }
    }
  }
  if (phase2_braking_) return {CommandMode::brake_to_stop, std::nullopt};
  if (v + 1e-9 >= move_speed_) {
    phase2_braking_ = true;
    return {CommandMode::brake_to_stop, std::nullopt};
  }
  return {CommandMode::track_speed, move_speed_};
}

KinematicCommand ReferencePolicy::caution(const Vista& vista, const PolicyEnv& env) {
  const ADFunctions& ad = env.ad;
  const PolicyParams& mg = env.margins;
  const double v = vista.ego.speed;
  const double c = vista.ego.chainage;

  if (env.ctx.kind == VistaKind::lane_change) {
    // Keep the current lane under a braking envelope against its lead vehicle.
    double dist_hold = nearest_front_gap(vista, false) - mg.inner_holdback;
    if (brake_latched_ || ad.braking_distance(v) + v * env.dt >= dist_hold) {
      brake_latched_ = true;
      return {CommandMode::brake_to_stop, std::nullopt};
    }
    return {CommandMode::hold, std::nullopt};
  }

  double dist_hold = (env.zone_entry - c) - mg.holdback;
  if (brake_latched_ || ad.braking_distance(v) + v * env.dt >= dist_hold) {
    brake_latched_ = true;
    return {CommandMode::brake_to_stop, std::nullopt};
  }
  double u = max_caution_speed(ad, dist_hold);
  return {CommandMode::track_speed, u};
}

KinematicCommand ReferencePolicy::decide(const Vista& vista, const PolicyEnv& env) {
  if (committed_) return committed_step(vista, env);
  if (kind_ != PolicyKind::overcautious && commit_ready(vista, env)) {
    committed_ = true;
    return committed_step(vista, env);
  }
  return caution(vista, env);
}

}  // namespace

std::unique_ptr<EgoPolicy> make_reference_policy(PolicyKind kind) {
  if (kind == PolicyKind::external)
    throw std::invalid_argument("external policy needs a bridge transport");
  return std::make_unique<ReferencePolicy>(kind);
}

KinematicCommand ArrivingController::decide(const Vista& vista, const PolicyEnv& env) {
  const double L = env.vehicle_length;
  const bool crossing = env.ctx.kind == VistaKind::crossing_yield ||
                        env.ctx.kind == VistaKind::crossing_light;
  bool occupied = false;
  for (const auto& av : vista.arriving) {
    if (av.state.kind != ObstacleKind::vehicle) continue;
    if (env.ctx.kind == VistaKind::lane_change && !av.state.committed) continue;
    double d = av.distance_to_conflict;
    // A vehicle whose front sits exactly on the merge point has not entered
    // the shared lane yet; treating it as occupying would deadlock both
    // parties when the other side holds at the same boundary.
    bool in = crossing ? (d < env.ctx.cd / 2.0 - 1e-6 && d > -(env.ctx.cd / 2.0 + L))
                       : (std::fabs(d) > 1e-9 && d <= L && d > -2.0 * L);
    if (in) occupied = true;
  }
  if (occupied) return {CommandMode::brake_to_stop, std::nullopt};

  // Stay inside the stopping envelope behind whatever leads this lane. The
  // brake command must be issued while a full stop still fits: retargeting
  // track-speed every tick restarts the jerk ramp and sheds almost no speed.
  double gap = nearest_front_gap(vista, false);
  double reserve = gap - env.margins.follow_gap;
  double v = vista.ego.speed;
  if (env.ad.braking_distance(v) + v * env.dt >= reserve)
    return {CommandMode::brake_to_stop, std::nullopt};
  double target = std::min(env.ctx.vl,
                           env.ad.speed_for_braking_distance(std::max(0.0, reserve)));
  return {CommandMode::track_speed, target};
}

double arriving_spawn_speed(const ADFunctions& ad, const Vista& vista, double vl,
                            double follow_gap) {
  double gap = nearest_front_gap(vista, false);
  return std::min(vl, ad.speed_for_braking_distance(std::max(0.0, gap - follow_gap)));
}

}  // namespace vistatest
