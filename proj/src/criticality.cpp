#include "vistatest/criticality.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vistatest/io.h"

namespace vistatest {

VistaContext context_for(VistaKind kind) {
  VistaContext ctx;
  ctx.kind = kind;
  switch (kind) {
    case VistaKind::merging:
    case VistaKind::lane_change:
      ctx.cd = 0.0;
      break;
    case VistaKind::crossing_yield:
    case VistaKind::crossing_light:
      ctx.cd = 24.0;
      break;
  }
  return ctx;
}

double max_caution_speed(const ADFunctions& ad, double dist, double tol) {
  if (dist <= 0.0) return 0.0;
  double hi = ad.v_cap();
  if (ad.braking_distance(hi) <= dist) return hi;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    double mid = 0.5 * (lo + hi);
    if (ad.braking_distance(mid) <= dist) lo = mid; else hi = mid;
  }
  return lo;
}

double initial_ego_distance(const VistaContext& ctx, const ADFunctions& ad, double ve) {
  if (ctx.kind == VistaKind::lane_change) return ctx.x_e_fixed;
  return ad.braking_distance(ve);
}

CriticalValues critical_values(const VistaContext& ctx, const ADFunctions& ad, double ve) {
  CriticalValues cv;
  cv.x_e = initial_ego_distance(ctx, ad, ve);
  switch (ctx.kind) {
    case VistaKind::merging: {
      AccelReach r = ad.accel_reach(ve, cv.x_e);
      cv.x_a_hat = ad.braking_distance(ctx.vl) + ctx.vl * r.time;
      cv.x_f_hat = ad.braking_distance(r.speed);
      break;
    }
    case VistaKind::lane_change: {
      if (ve <= 0.0) throw std::invalid_argument("lane change requires a moving ego");
      cv.x_a_hat = ctx.vl * (cv.x_e / ve) + ad.braking_distance(ctx.vl);
      cv.x_f_hat = ad.braking_distance(ve);
      break;
    }
    case VistaKind::crossing_yield: {
      AccelReach r = ad.accel_reach(ve, cv.x_e + ctx.cd);
      cv.x_a_hat = ctx.vl * r.time;
      cv.x_f_hat = ad.braking_distance(r.speed);
      break;
    }
    case VistaKind::crossing_light: {
      AccelReach r_entry = ad.accel_reach(ve, cv.x_e);
      AccelReach r_exit = ad.accel_reach(ve, cv.x_e + ctx.cd);
      cv.feasible = r_entry.time <= ctx.ty && r_exit.time <= ctx.ty + ctx.tar;
      cv.x_f_hat = ad.braking_distance(r_exit.speed);
      break;
    }
  }
  return cv;
}

std::vector<double> default_ve_values(VistaKind kind) {
  switch (kind) {
    case VistaKind::merging:
    case VistaKind::crossing_yield:
      return {0.0, 5.0, 10.0, 15.0};
    case VistaKind::lane_change:
      return {5.0, 10.0, 15.0, 20.0};
    case VistaKind::crossing_light:
      return {0.0, 5.0, 10.0, 15.0, 20.0};
  }
  throw std::logic_error("unknown vista kind");
}

json test_case_to_json(const TestCase& tc) {
  json j;
  j["kind"] = to_string(tc.kind);
  j["profile"] = tc.profile;
  j["ve"] = tc.ve;
  j["xe"] = tc.xe;
  if (tc.xa) j["xa"] = *tc.xa;
  j["xf"] = tc.xf;
  return j;
}

TestCase test_case_from_json(const json& j) {
  TestCase tc;
  tc.kind = vista_kind_from_string(j.at("kind").get<std::string>());
  tc.profile = j.at("profile").get<std::string>();
  tc.ve = j.at("ve").get<double>();
  tc.xe = j.at("xe").get<double>();
  if (j.contains("xa")) tc.xa = j.at("xa").get<double>();
  tc.xf = j.at("xf").get<double>();
  return tc;
}

std::vector<TestCase> generate_grid(const VistaContext& ctx, const ADFunctions& ad,
                                    const std::string& profile, double ve,
                                    const GridSpec& spec) {
  std::vector<double> axis;
  for (double x = spec.lo; x <= spec.hi + 1e-9; x += spec.step) axis.push_back(x);
  double xe = initial_ego_distance(ctx, ad, ve);
  std::vector<TestCase> out;
  if (ctx.kind == VistaKind::crossing_light) {
    for (double xf : axis) {
      TestCase tc;
      tc.kind = ctx.kind;
      tc.profile = profile;
      tc.ve = ve;
      tc.xe = xe;
      tc.xf = xf;
      out.push_back(tc);
    }
    return out;
  }
  bool filtered = ctx.kind == VistaKind::merging || ctx.kind == VistaKind::lane_change;
  double floor = ad.braking_distance(ctx.vl);
  for (double xf : axis) {
    for (double xa : axis) {
      if (filtered && xa + xf < floor - 1e-9) continue;
      TestCase tc;
      tc.kind = ctx.kind;
      tc.profile = profile;
      tc.ve = ve;
      tc.xe = xe;
      tc.xa = xa;
      tc.xf = xf;
      out.push_back(tc);
    }
  }
  return out;
}

std::vector<double> refinement_fill(double lo, double hi, double step) {
  std::vector<double> out;
  for (int k = 1; lo + k * step < hi - 1e-9; ++k) out.push_back(lo + k * step);
  return out;
}

}  // namespace vistatest
