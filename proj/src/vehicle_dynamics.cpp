#include "vistatest/vehicle_dynamics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vistatest/io.h"

namespace vistatest {

namespace {

constexpr double kEps = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if ((fm <= 0.0) == (flo <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

EvalPoint eval_phases(const MotionPlan& plan, double t) {
  if (t <= 0.0) return {plan.phases.empty() ? plan.cruise_v : plan.phases.front().v0, 0.0};
  double remaining = t;
  for (const auto& ph : plan.phases) {
    if (remaining <= ph.dur || &ph == &plan.phases.back()) {
      double u = std::min(remaining, ph.dur);
      double v = ph.v0 + ph.a0 * u + 0.5 * ph.j * u * u;
      double x = ph.x0 + ph.v0 * u + 0.5 * ph.a0 * u * u + ph.j * u * u * u / 6.0;
      if (remaining <= ph.dur) return {v, x};
    }
    remaining -= ph.dur;
  }
  return {plan.cruise_v, plan.total_dist + plan.cruise_v * (t - plan.total_time)};
}

// Chains phases from (a_start, v_start), filling v0/x0/totals.
MotionPlan seal_phases(std::vector<PlanPhase> phases, double v_start) {
  MotionPlan plan;
  plan.kind = MotionPlan::Kind::jerk_phases;
  double v = v_start, x = 0.0, t = 0.0;
  for (auto& ph : phases) {
    ph.v0 = v;
    ph.x0 = x;
    double u = ph.dur;
    x += v * u + 0.5 * ph.a0 * u * u + ph.j * u * u * u / 6.0;
    v += ph.a0 * u + 0.5 * ph.j * u * u;
    t += u;
  }
  plan.phases = std::move(phases);
  plan.total_time = t;
  plan.total_dist = x;
  plan.terminal_v = std::max(0.0, v);
  plan.cruise_v = plan.terminal_v;
  return plan;
}

MotionPlan cruise_plan(double v) {
  MotionPlan plan;
  plan.kind = MotionPlan::Kind::cruise;
  plan.terminal_v = v;
  plan.cruise_v = v;
  return plan;
}

// Time within a descending-speed plan at which the speed first equals vt.
double time_at_speed_descending(const MotionPlan& plan, double vt) {
  double base = 0.0;
  for (const auto& ph : plan.phases) {
    double v_end = ph.v0 + ph.a0 * ph.dur + 0.5 * ph.j * ph.dur * ph.dur;
    if (vt > ph.v0 + 1e-9) return base;  // already below target at phase start
    if (vt >= v_end - 1e-9) {
      double u;
      if (std::abs(ph.j) < kEps) {
        u = std::abs(ph.a0) < kEps ? 0.0 : (vt - ph.v0) / ph.a0;
      } else {
        double disc = ph.a0 * ph.a0 + 2.0 * ph.j * (vt - ph.v0);
        disc = std::max(0.0, disc);
        double r1 = (-ph.a0 - std::sqrt(disc)) / ph.j;
        double r2 = (-ph.a0 + std::sqrt(disc)) / ph.j;
        u = ph.dur + 1.0;
        for (double r : {r1, r2})
          if (r >= -1e-9 && r <= ph.dur + 1e-9) u = std::min(u, std::max(0.0, r));
        if (u > ph.dur + 0.5) u = ph.dur;  // numeric edge: land on the phase end
      }
      return base + std::clamp(u, 0.0, ph.dur);
    }
    base += ph.dur;
  }
  return plan.total_time;
}

MotionPlan truncate_plan(const ADFunctions& ad, const MotionPlan& plan, double t_cut) {
  MotionPlan out;
  out.kind = MotionPlan::Kind::jerk_phases;
  double remaining = t_cut;
  for (const auto& ph : plan.phases) {
    if (remaining <= 0.0) break;
    PlanPhase p = ph;
    p.dur = std::min(ph.dur, remaining);
    out.phases.push_back(p);
    remaining -= ph.dur;
  }
  EvalPoint end = ad.eval(plan, t_cut);
  out.total_time = t_cut;
  out.total_dist = end.x;
  out.terminal_v = std::max(0.0, end.v);
  out.cruise_v = out.terminal_v;
  return out;
}

double interp1(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  size_t i = it - xs.begin();
  double f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + f * (ys[i] - ys[i - 1]);
}

double bilinear(const std::vector<double>& vs, const std::vector<double>& xs,
                const std::vector<std::vector<double>>& table, double v, double x) {
  v = std::clamp(v, vs.front(), vs.back());
  x = std::clamp(x, xs.front(), xs.back());
  size_t i = std::upper_bound(vs.begin(), vs.end(), v) - vs.begin();
  i = std::clamp<size_t>(i, 1, vs.size() - 1);
  size_t j = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
  j = std::clamp<size_t>(j, 1, xs.size() - 1);
  double fv = (v - vs[i - 1]) / (vs[i] - vs[i - 1]);
  double fx = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  double a = table[i - 1][j - 1] * (1 - fx) + table[i - 1][j] * fx;
  double b = table[i][j - 1] * (1 - fx) + table[i][j] * fx;
  return a * (1 - fv) + b * fv;
}

// Integrating factor exponent of the ramped acceleration law.
double ode_phi(const OdeProfile& p, double t) {
  double alpha = 0.5 * p.ramp_slope;
  double beta = p.gain_offset;
  double sat = p.ramp_saturation;
  if (t <= sat) return alpha * t * t + beta * t;
  double gamma = p.ramp_slope * sat + p.gain_offset;
  return alpha * sat * sat + beta * sat + gamma * (t - sat);
}

double ode_phi_inverse(const OdeProfile& p, double F) {
  double alpha = 0.5 * p.ramp_slope;
  double beta = p.gain_offset;
  double sat = p.ramp_saturation;
  double phi_sat = alpha * sat * sat + beta * sat;
  if (F <= phi_sat) {
    if (alpha < kEps) return F / beta;
    return (-beta + std::sqrt(beta * beta + 4.0 * alpha * F)) / (2.0 * alpha);
  }
  double gamma = p.ramp_slope * sat + p.gain_offset;
  return sat + (F - phi_sat) / gamma;
}

// Integral of exp(-phi(s)) ds from 0 to t.
double ode_integral(const OdeProfile& p, double t) {
  double alpha = 0.5 * p.ramp_slope;
  double beta = p.gain_offset;
  double sat = p.ramp_saturation;
  auto core = [&](double u) {
    if (alpha < kEps) return (1.0 - std::exp(-beta * u)) / beta;
    double sa = std::sqrt(alpha);
    double shift = beta / (2.0 * alpha);
    double scale = std::exp(beta * beta / (4.0 * alpha)) * std::sqrt(M_PI / alpha) * 0.5;
    return scale * (std::erf(sa * (u + shift)) - std::erf(sa * shift));
  };
  if (t <= sat) return core(t);
  double gamma = p.ramp_slope * sat + p.gain_offset;
  double phi_sat = alpha * sat * sat + beta * sat;
  return core(sat) + std::exp(-phi_sat) * (1.0 - std::exp(-gamma * (t - sat))) / gamma;
}

double ode_speed(const OdeProfile& p, double v0, double t) {
  return p.v_limit - (p.v_limit - v0) * std::exp(-ode_phi(p, t));
}

double ode_distance(const OdeProfile& p, double v0, double t) {
  return p.v_limit * t - (p.v_limit - v0) * ode_integral(p, t);
}

}  // namespace

std::string to_string(CommandMode m) {
  switch (m) {
    case CommandMode::brake_to_stop: return "brake-to-stop";
    case CommandMode::accelerate: return "accelerate";
    case CommandMode::hold: return "hold";
    case CommandMode::track_speed: return "track-speed";
  }
  throw std::logic_error("bad command mode");
}

CommandMode command_mode_from_string(const std::string& s) {
  if (s == "brake-to-stop") return CommandMode::brake_to_stop;
  if (s == "accelerate") return CommandMode::accelerate;
  if (s == "hold") return CommandMode::hold;
  if (s == "track-speed") return CommandMode::track_speed;
  throw std::invalid_argument("unknown command mode: " + s);
}

bool same_command(const KinematicCommand& a, const KinematicCommand& b) {
  if (a.mode != b.mode) return false;
  if (a.target.has_value() != b.target.has_value()) return false;
  return !a.target || std::abs(*a.target - *b.target) < kEps;
}

ADFunctions::ADFunctions(JerkLimitedProfile p, std::string name)
    : profile_(p), name_(std::move(name)) {
  if (p.a_max <= 0 || p.j_accel_up <= 0 || p.j_accel_down <= 0 || p.d_max <= 0 ||
      p.j_decel_up <= 0 || p.j_decel_down <= 0)
    throw std::invalid_argument("jerk-limited profile fields must be positive");
}

ADFunctions::ADFunctions(OdeProfile p, std::string name) : profile_(p), name_(std::move(name)) {
  if (p.decel_gain <= 0 || p.v_limit <= 0 || p.stop_speed <= 0)
    throw std::invalid_argument("ode profile fields must be positive");
}

ADFunctions::ADFunctions(TableProfile p, std::string name) : profile_(p), name_(std::move(name)) {
  if (p.brake_speeds.size() != p.brake_dists.size() || p.brake_speeds.size() < 2)
    throw std::invalid_argument("table profile: bad braking table");
  if (p.speeds.size() < 2 || p.dists.size() < 2)
    throw std::invalid_argument("table profile: need at least a 2x2 grid");
  if (p.at.size() != p.speeds.size() || p.av.size() != p.speeds.size())
    throw std::invalid_argument("table profile: row count mismatch");
  for (const auto& row : p.at)
    if (row.size() != p.dists.size()) throw std::invalid_argument("table profile: AT row size");
  for (const auto& row : p.av)
    if (row.size() != p.dists.size()) throw std::invalid_argument("table profile: AV row size");
}

ADFunctions ADFunctions::preset(const std::string& name) {
  if (name == "apollo-like") {
    JerkLimitedProfile p;
    p.a_max = 2.0;
    p.j_accel_up = 2.0;
    p.j_accel_down = 4.0;
    p.d_max = 6.115;
    p.j_decel_up = 3.830488;
    p.j_decel_down = 2.166916;
    p.v_cap = 22.2;
    return ADFunctions(p, name);
  }
  if (name == "autoware-like") {
    JerkLimitedProfile p;
    p.a_max = 1.0;
    p.j_accel_up = 1.0;
    p.j_accel_down = 5.0;
    p.d_max = 5.0;
    p.j_decel_up = 5.0;
    p.j_decel_down = 25.0;
    p.v_cap = 22.2;
    return ADFunctions(p, name);
  }
  if (name == "lgsvl-ode") return ADFunctions(OdeProfile{}, name);
  if (name == "carla-empirical") {
    TableProfile t;
    t.brake_speeds = {0.0, 5.0, 10.0, 15.0, 20.0};
    t.brake_dists = {0.0, 0.8, 6.8, 15.8, 26.0};
    t.speeds = {0.0, 5.0, 10.0, 15.0};
    t.dists = {0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
    t.av = {{0.0, 10.3, 14.2, 16.9, 19.1, 21.0, 22.2},
            {5.0, 11.0, 14.7, 17.2, 19.4, 21.3, 22.2},
            {10.0, 13.6, 16.4, 18.9, 20.8, 22.2, 22.2},
            {15.0, 17.0, 19.3, 21.1, 22.2, 22.2, 22.2}};
    t.at = {{0.0, 2.2, 3.0, 3.7, 4.2, 4.7, 5.2},
            {0.0, 1.4, 2.2, 2.8, 3.4, 3.9, 4.3},
            {0.0, 1.0, 1.6, 2.2, 2.7, 3.2, 3.6},
            {0.0, 0.7, 1.3, 1.8, 2.2, 2.7, 3.1}};
    t.partial_overrides[{20.0, 15.0}] = 12.2;
    return ADFunctions(t, name);
  }
  throw std::invalid_argument("unknown preset: " + name);
}

std::vector<std::string> ADFunctions::preset_names() {
  return {"apollo-like", "autoware-like", "lgsvl-ode", "carla-empirical"};
}

double ADFunctions::v_cap() const {
  if (const auto* p = std::get_if<JerkLimitedProfile>(&profile_))
    return p->v_cap ? *p->v_cap : kInf;
  if (const auto* p = std::get_if<OdeProfile>(&profile_)) return p->v_limit;
  const auto& t = std::get<TableProfile>(profile_);
  return std::max(t.speeds.back(), t.brake_speeds.back());
}

MotionPlan ADFunctions::plan_brake(double v) const {
  if (v <= kEps) return cruise_plan(0.0);
  if (const auto* p = std::get_if<JerkLimitedProfile>(&profile_)) {
    double ju = p->j_decel_up, jd = p->j_decel_down, d = p->d_max;
    double capacity = 0.5 * d * d * (1.0 / ju + 1.0 / jd);
    std::vector<PlanPhase> phases;
    if (v >= capacity) {
      double h = (v - capacity) / d;
      phases.push_back({d / ju, -ju, 0.0, 0.0, 0.0});
      phases.push_back({h, 0.0, -d, 0.0, 0.0});
      phases.push_back({d / jd, jd, -d, 0.0, 0.0});
    } else {
      double dp = std::sqrt(2.0 * v / (1.0 / ju + 1.0 / jd));
      phases.push_back({dp / ju, -ju, 0.0, 0.0, 0.0});
      phases.push_back({dp / jd, jd, -dp, 0.0, 0.0});
    }
    MotionPlan plan = seal_phases(std::move(phases), v);
    plan.terminal_v = 0.0;
    plan.cruise_v = 0.0;
    return plan;
  }
  if (const auto* p = std::get_if<OdeProfile>(&profile_)) {
    MotionPlan plan;
    plan.kind = MotionPlan::Kind::ode_brake;
    plan.p0 = v;
    if (v <= p->stop_speed) return cruise_plan(0.0);
    plan.total_time = std::log(v / p->stop_speed) / p->decel_gain;
    plan.total_dist = (v - p->stop_speed) / p->decel_gain;
    plan.terminal_v = 0.0;
    plan.cruise_v = 0.0;
    return plan;
  }
  double b = braking_distance(v);
  double rate = b > kEps ? v * v / (2.0 * b) : std::get<TableProfile>(profile_).nominal_rate;
  std::vector<PlanPhase> phases{{v / rate, 0.0, -rate, 0.0, 0.0}};
  MotionPlan plan = seal_phases(std::move(phases), v);
  plan.terminal_v = 0.0;
  plan.cruise_v = 0.0;
  return plan;
}

double ADFunctions::braking_distance(double v) const {
  if (v <= 0.0) return 0.0;
  if (std::holds_alternative<JerkLimitedProfile>(profile_)) return plan_brake(v).total_dist;
  if (const auto* p = std::get_if<OdeProfile>(&profile_)) return v / p->decel_gain;
  const auto& t = std::get<TableProfile>(profile_);
  return interp1(t.brake_speeds, t.brake_dists, v);
}

double ADFunctions::braking_partial(double v, double v_target) const {
  if (v_target >= v) return 0.0;
  if (v_target <= 0.0) return braking_distance(v);
  if (std::holds_alternative<JerkLimitedProfile>(profile_)) {
    MotionPlan plan = plan_brake(v);
    double tc = time_at_speed_descending(plan, v_target);
    return eval(plan, tc).x;
  }
  if (const auto* p = std::get_if<OdeProfile>(&profile_)) return (v - v_target) / p->decel_gain;
  const auto& t = std::get<TableProfile>(profile_);
  for (const auto& [key, val] : t.partial_overrides)
    if (std::abs(key.first - v) < 1e-9 && std::abs(key.second - v_target) < 1e-9) return val;
  return braking_distance(v) - braking_distance(v_target);
}

namespace {

// Ramp the rate up to a peak and back down, ending with speed raised to vt.
MotionPlan speed_change_up(const JerkLimitedProfile& p, double v, double vt) {
  double dv = vt - v;
  if (dv <= kEps) return cruise_plan(v);
  double ju = p.j_accel_up, jd = p.j_accel_down, a = p.a_max;
  double capacity = 0.5 * a * a * (1.0 / ju + 1.0 / jd);
  std::vector<PlanPhase> phases;
  if (dv >= capacity) {
    double h = (dv - capacity) / a;
    phases.push_back({a / ju, ju, 0.0, 0.0, 0.0});
    phases.push_back({h, 0.0, a, 0.0, 0.0});
    phases.push_back({a / jd, -jd, a, 0.0, 0.0});
  } else {
    double ap = std::sqrt(2.0 * dv / (1.0 / ju + 1.0 / jd));
    phases.push_back({ap / ju, ju, 0.0, 0.0, 0.0});
    phases.push_back({ap / jd, -jd, ap, 0.0, 0.0});
  }
  MotionPlan plan = seal_phases(std::move(phases), v);
  plan.terminal_v = vt;
  plan.cruise_v = vt;
  return plan;
}

}  // namespace

MotionPlan ADFunctions::plan_accel_over(double v, double dist) const {
  if (dist <= kEps) return cruise_plan(std::max(0.0, v));
  double cap = v_cap();
  if (const auto* p = std::get_if<JerkLimitedProfile>(&profile_)) {
    if (v >= cap - 1e-12) return cruise_plan(v);
    double ju = p->j_accel_up, jd = p->j_accel_down, a = p->a_max;
    double t1 = a / ju;
    double v1 = v + 0.5 * a * a / ju;
    double x1 = v * t1 + ju * t1 * t1 * t1 / 6.0;
    double t3 = a / jd;
    double K0 = x1 + v1 * t3 + 0.5 * a * t3 * t3 - jd * t3 * t3 * t3 / 6.0;
    double K1 = v1 + a * t3;
    double av;
    std::vector<PlanPhase> phases;
    if (K0 <= dist) {
      double h = (-K1 + std::sqrt(K1 * K1 + 2.0 * a * (dist - K0))) / a;
      av = v1 + a * h + 0.5 * a * a / jd;
      if (av <= cap + 1e-12) {
        phases.push_back({t1, ju, 0.0, 0.0, 0.0});
        phases.push_back({h, 0.0, a, 0.0, 0.0});
        phases.push_back({t3, -jd, a, 0.0, 0.0});
      }
    } else {
      double lo = 0.0, hi = a;
      auto dist_for_peak = [&](double ap) {
        double u1 = ap / ju, u3 = ap / jd;
        double vv1 = v + 0.5 * ap * ap / ju;
        double xx = v * u1 + ju * u1 * u1 * u1 / 6.0;
        xx += vv1 * u3 + 0.5 * ap * u3 * u3 - jd * u3 * u3 * u3 / 6.0;
        return xx - dist;
      };
      double ap = bisect(dist_for_peak, lo, hi);
      av = v + 0.5 * ap * ap * (1.0 / ju + 1.0 / jd);
      if (av <= cap + 1e-12) {
        phases.push_back({ap / ju, ju, 0.0, 0.0, 0.0});
        phases.push_back({ap / jd, -jd, ap, 0.0, 0.0});
      }
    }
    if (!phases.empty()) {
      MotionPlan plan = seal_phases(std::move(phases), v);
      plan.terminal_v = std::min(av, cap);
      plan.cruise_v = plan.terminal_v;
      return plan;
    }
    return speed_change_up(*p, v, cap);  // the distance saturates the speed cap
  }
  if (std::holds_alternative<OdeProfile>(profile_)) {
    MotionPlan plan;
    plan.kind = MotionPlan::Kind::ode_accel;
    plan.p0 = std::max(0.0, v);
    plan.p1 = cap;
    plan.total_time = kInf;
    plan.total_dist = kInf;
    plan.terminal_v = cap;
    plan.cruise_v = cap;
    return plan;
  }
  MotionPlan plan;
  plan.kind = MotionPlan::Kind::table_accel;
  plan.p0 = std::max(0.0, v);
  plan.total_time = kInf;
  plan.total_dist = kInf;
  plan.terminal_v = cap;
  plan.cruise_v = cap;
  return plan;
}

MotionPlan ADFunctions::plan_accel_free(double v) const {
  if (const auto* p = std::get_if<JerkLimitedProfile>(&profile_)) {
    double cap = v_cap();
    if (!std::isfinite(cap)) cap = v + 1e6;
    if (v >= cap - 1e-12) return cruise_plan(v);
    return speed_change_up(*p, v, cap);
  }
  return plan_accel_over(v, 1.0);  // ode and table accelerate under one law regardless of span
}

MotionPlan ADFunctions::plan_track(double v, double target) const {
  target = std::clamp(target, 0.0, v_cap());
  if (std::abs(target - v) < kEps) return cruise_plan(std::max(0.0, v));
  if (target < v) {
    if (target <= kEps) return plan_brake(v);
    if (std::holds_alternative<JerkLimitedProfile>(profile_) ||
        std::holds_alternative<TableProfile>(profile_)) {
      MotionPlan full = plan_brake(v);
      double tc = time_at_speed_descending(full, target);
      MotionPlan plan = truncate_plan(*this, full, tc);
      plan.terminal_v = target;
      plan.cruise_v = target;
      return plan;
    }
    const auto& p = std::get<OdeProfile>(profile_);
    MotionPlan plan;
    plan.kind = MotionPlan::Kind::ode_brake;
    plan.p0 = v;
    plan.p1 = target;
    plan.total_time = std::log(v / target) / p.decel_gain;
    plan.total_dist = (v - target) / p.decel_gain;
    plan.terminal_v = target;
    plan.cruise_v = target;
    return plan;
  }
  if (const auto* p = std::get_if<JerkLimitedProfile>(&profile_))
    return speed_change_up(*p, std::max(0.0, v), target);
  if (const auto* p = std::get_if<OdeProfile>(&profile_)) {
    MotionPlan plan;
    plan.kind = MotionPlan::Kind::ode_accel;
    plan.p0 = std::max(0.0, v);
    plan.p1 = target;
    double ratio = (p->v_limit - plan.p0) / std::max(kEps, p->v_limit - target);
    plan.total_time = ratio <= 1.0 ? 0.0 : ode_phi_inverse(*p, std::log(ratio));
    plan.total_dist = ode_distance(*p, plan.p0, plan.total_time);
    plan.terminal_v = target;
    plan.cruise_v = target;
    return plan;
  }
  const auto& t = std::get<TableProfile>(profile_);
  double rate = t.nominal_rate;
  std::vector<PlanPhase> phases{{(target - std::max(0.0, v)) / rate, 0.0, rate, 0.0, 0.0}};
  MotionPlan plan = seal_phases(std::move(phases), std::max(0.0, v));
  plan.terminal_v = target;
  plan.cruise_v = target;
  return plan;
}

EvalPoint ADFunctions::eval(const MotionPlan& plan, double t) const {
  t = std::max(0.0, t);
  switch (plan.kind) {
    case MotionPlan::Kind::cruise:
      return {plan.cruise_v, plan.cruise_v * t};
    case MotionPlan::Kind::jerk_phases:
    case MotionPlan::Kind::table_brake:
      return eval_phases(plan, t);
    case MotionPlan::Kind::ode_brake: {
      const auto& p = std::get<OdeProfile>(profile_);
      if (t >= plan.total_time)
        return {plan.terminal_v,
                plan.total_dist + plan.terminal_v * (t - plan.total_time)};
      double v = plan.p0 * std::exp(-p.decel_gain * t);
      double x = (plan.p0 - v) / p.decel_gain;
      return {v, x};
    }
    case MotionPlan::Kind::ode_accel: {
      const auto& p = std::get<OdeProfile>(profile_);
      if (t >= plan.total_time)
        return {plan.terminal_v, plan.total_dist + plan.terminal_v * (t - plan.total_time)};
      return {ode_speed(p, plan.p0, t), ode_distance(p, plan.p0, t)};
    }
    case MotionPlan::Kind::table_accel: {
      // closed-form eval unsupported; stepped incrementally in step()
      throw std::logic_error("table accel plans are integrated, not evaluated");
    }
  }
  throw std::logic_error("bad plan kind");
}

double ADFunctions::time_at_distance(const MotionPlan& plan, double dist) const {
  if (dist <= 0.0) return 0.0;
  if (plan.kind == MotionPlan::Kind::ode_accel && !std::isfinite(plan.total_time)) {
    const auto& p = std::get<OdeProfile>(profile_);
    double hi = 10.0;
    while (ode_distance(p, plan.p0, hi) < dist) hi *= 2.0;
    return bisect([&](double t) { return ode_distance(p, plan.p0, t) - dist; }, 0.0, hi);
  }
  if (std::isfinite(plan.total_dist) && dist > plan.total_dist) {
    if (dist - plan.total_dist <= 1e-9) return plan.total_time;
    if (plan.cruise_v <= kEps)
      throw std::runtime_error("plan never covers distance " + format_double(dist));
    return plan.total_time + (dist - plan.total_dist) / plan.cruise_v;
  }
  double hi = std::isfinite(plan.total_time) ? plan.total_time : 1e6;
  return bisect([&](double t) { return eval(plan, t).x - dist; }, 0.0, hi);
}

AccelReach ADFunctions::accel_reach(double v, double x) const {
  if (x <= 0.0) return {0.0, std::max(0.0, v)};
  if (const auto* t = std::get_if<TableProfile>(&profile_)) {
    return {bilinear(t->speeds, t->dists, t->at, v, x), bilinear(t->speeds, t->dists, t->av, v, x)};
  }
  MotionPlan plan = plan_accel_over(v, x);
  double time = time_at_distance(plan, x);
  double speed = plan.kind == MotionPlan::Kind::ode_accel
                     ? ode_speed(std::get<OdeProfile>(profile_), plan.p0, time)
                     : eval(plan, time).v;
  return {time, speed};
}

double ADFunctions::speed_for_braking_distance(double x, double tol) const {
  if (x <= 0.0) return 0.0;
  double hi = std::min(v_cap(), 1e3);
  if (braking_distance(hi) <= x) return hi;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    double mid = 0.5 * (lo + hi);
    (braking_distance(mid) <= x ? lo : hi) = mid;
  }
  return lo;
}

double ADFunctions::accel_distance_to_speed(double v, double v_target) const {
  v_target = std::min(v_target, v_cap());
  if (v_target <= v) return 0.0;
  if (const auto* t = std::get_if<TableProfile>(&profile_)) {
    double hi = t->dists.back();
    if (bilinear(t->speeds, t->dists, t->av, v, hi) < v_target) return hi;
    return bisect(
        [&](double x) { return bilinear(t->speeds, t->dists, t->av, v, x) - v_target; }, 0.0, hi);
  }
  MotionPlan plan = plan_track(v, v_target);
  return plan.total_dist;
}

double ADFunctions::accel_time_to_speed(double v, double v_target) const {
  v_target = std::min(v_target, v_cap());
  if (v_target <= v) return 0.0;
  if (std::holds_alternative<TableProfile>(profile_)) {
    double x = accel_distance_to_speed(v, v_target);
    const auto* t = std::get_if<TableProfile>(&profile_);
    return bilinear(t->speeds, t->dists, t->at, v, x);
  }
  return plan_track(v, v_target).total_time;
}

StepResult ADFunctions::step(KinematicState& state, const KinematicCommand& cmd, double dt) const {
  if (!state.has_plan || !same_command(cmd, state.active)) {
    state.active = cmd;
    state.t_in = 0.0;
    state.acc_x = 0.0;
    state.has_plan = true;
    switch (cmd.mode) {
      case CommandMode::brake_to_stop:
        state.plan = plan_brake(state.v);
        break;
      case CommandMode::accelerate:
        state.plan = cmd.target ? plan_accel_over(state.v, *cmd.target) : plan_accel_free(state.v);
        break;
      case CommandMode::hold:
        state.plan = cruise_plan(std::max(0.0, state.v));
        break;
      case CommandMode::track_speed:
        state.plan = plan_track(state.v, cmd.target.value_or(state.v));
        break;
    }
  }
  if (state.plan.kind == MotionPlan::Kind::table_accel) {
    const auto& t = std::get<TableProfile>(profile_);
    double v_now = std::max(state.v, bilinear(t.speeds, t.dists, t.av, state.plan.p0, state.acc_x));
    double dx = v_now * dt;
    state.acc_x += dx;
    double v_next = std::max(v_now, bilinear(t.speeds, t.dists, t.av, state.plan.p0, state.acc_x));
    state.v = v_next;
    state.t_in += dt;
    return {v_next, dx};
  }
  double t0 = state.t_in;
  double t1 = t0 + dt;
  EvalPoint e0 = eval(state.plan, t0);
  EvalPoint e1 = eval(state.plan, t1);
  state.t_in = t1;
  state.v = std::max(0.0, e1.v);
  return {state.v, std::max(0.0, e1.x - e0.x)};
}

CapabilityReport check_capability(const ADFunctions& ad, const CapabilityGrid& grid,
                                  const CapabilityOptions& options) {
  CapabilityReport rep;
  auto& speeds = grid.speeds;
  auto& dists = grid.dists;

  double b0 = ad.braking_distance(0.0);
  if (std::abs(b0) > 1e-6)
    rep.strictness.push_back({"B(0) = " + format_double(b0) + ", expected 0"});
  for (double v : speeds) {
    if (v > 0.0 && ad.braking_distance(v) <= 0.0)
      rep.strictness.push_back({"B(" + format_double(v) + ") is not positive"});
    AccelReach r0 = ad.accel_reach(v, 0.0);
    if (std::abs(r0.time) > 1e-6)
      rep.strictness.push_back({"AT(" + format_double(v) + ", 0) = " + format_double(r0.time) +
                                ", expected 0"});
    if (std::abs(r0.speed - v) > 1e-6)
      rep.strictness.push_back({"AV(" + format_double(v) + ", 0) = " + format_double(r0.speed) +
                                ", expected " + format_double(v)});
  }

  auto record = [&](const std::string& q, double v1, double v2, double x, double a, double b) {
    rep.monotonicity.push_back({q, v1, v2, x, a, b, b - a});
  };
  for (size_t i = 1; i < speeds.size(); ++i) {
    double a = ad.braking_distance(speeds[i - 1]);
    double b = ad.braking_distance(speeds[i]);
    if (b < a - options.monotonicity_tol) record("B", speeds[i - 1], speeds[i], 0.0, a, b);
  }
  for (double x : dists) {
    if (x <= 0.0) continue;
    for (size_t i = 1; i < speeds.size(); ++i) {
      AccelReach lo = ad.accel_reach(speeds[i - 1], x);
      AccelReach hi = ad.accel_reach(speeds[i], x);
      if (hi.time > lo.time + options.monotonicity_tol)
        record("AT_v", speeds[i - 1], speeds[i], x, lo.time, hi.time);
      if (hi.speed < lo.speed - options.monotonicity_tol)
        record("AV_v", speeds[i - 1], speeds[i], x, lo.speed, hi.speed);
    }
  }
  for (double v : speeds) {
    for (size_t j = 1; j < dists.size(); ++j) {
      AccelReach lo = ad.accel_reach(v, dists[j - 1]);
      AccelReach hi = ad.accel_reach(v, dists[j]);
      if (hi.time < lo.time - options.monotonicity_tol)
        record("AT_x", v, v, dists[j], lo.time, hi.time);
      if (hi.speed < lo.speed - options.monotonicity_tol)
        record("AV_x", v, v, dists[j], lo.speed, hi.speed);
    }
  }

  for (size_t i = 0; i < speeds.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      double v = speeds[i], vt = speeds[j];
      if (v <= vt) continue;
      double dev = std::abs(ad.braking_distance(v) -
                            (ad.braking_partial(v, vt) + ad.braking_distance(vt)));
      rep.additivity.push_back({v, vt, dev});
      if (dev > rep.additivity_max) {
        rep.additivity_max = dev;
        rep.additivity_arg_v = v;
        rep.additivity_arg_vt = vt;
      }
    }
  }

  for (double v : speeds) {
    if (v <= 0.0) continue;
    double b = ad.braking_distance(v);
    if (b > 1e-9) {
      double rate = v * v / (2.0 * b);
      if (rate > options.decel_flag) rep.realism.push_back({"decel", v, std::nullopt, rate});
    }
  }
  for (double v : speeds) {
    for (double x : dists) {
      if (x <= 0.0) continue;
      AccelReach r = ad.accel_reach(v, x);
      if (r.time > 1e-9) {
        double rate = (r.speed - v) / r.time;
        if (rate > options.accel_flag) rep.realism.push_back({"accel", v, x, rate});
      }
    }
  }
  return rep;
}

double estimate_braking_distance(const std::function<bool(double)>& stops_short,
                                 const EmpiricalOptions& options) {
  for (int i = 1;; ++i) {
    double x = options.step * i;
    if (x > options.bound + 1e-9)
      throw std::runtime_error("no safe stopping distance found within bound");
    if (stops_short(x)) return x;
  }
}

std::function<bool(double)> make_stopping_probe(const ADFunctions& ad, double v, double dt) {
  return [ad, v, dt](double obstacle) {
    KinematicState st;
    st.v = v;
    double covered = 0.0;
    for (int i = 0; i < 2000000; ++i) {
      if (st.v <= 1e-9 && i > 0) return covered < obstacle;
      StepResult r = ad.step(st, {CommandMode::brake_to_stop, std::nullopt}, dt);
      covered += r.dx;
      if (covered >= obstacle - 1e-12) return false;
    }
    return false;
  };
}

AccelReach estimate_accel_reach(
    const std::function<std::optional<AccelReach>(double)>& cruise_probe, double v, double v_max,
    const EmpiricalOptions& options) {
  for (int i = 1;; ++i) {
    double limit = v + options.step * i;
    if (limit > v_max + 1e-9)
      throw std::runtime_error("no cruise limit covers the distance while still accelerating");
    if (auto r = cruise_probe(limit)) return *r;
  }
}

std::function<std::optional<AccelReach>(double)> make_cruise_probe(const ADFunctions& ad, double v,
                                                                   double x, double dt) {
  return [ad, v, x, dt](double limit) -> std::optional<AccelReach> {
    KinematicState st;
    st.v = v;
    double covered = 0.0;
    double t = 0.0;
    for (int i = 0; i < 2000000; ++i) {
      StepResult r = ad.step(st, {CommandMode::track_speed, limit}, dt);
      covered += r.dx;
      t += dt;
      if (covered >= x) return AccelReach{t, st.v};
      if (st.has_plan && std::isfinite(st.plan.total_time) && st.t_in >= st.plan.total_time)
        return std::nullopt;  // saturated at the limit before covering x
    }
    return std::nullopt;
  };
}

}  // namespace vistatest
