#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vistatest/io.h"
#include "vistatest/metric_map.h"
#include "vistatest/vehicle_dynamics.h"

namespace vistatest {

// Scenario-family parameters shared by critical-value computation and the
// policies that act on them.
struct VistaContext {
  VistaKind kind = VistaKind::merging;
  double vl = 22.2;    // arriving-lane speed limit
  double cd = 0.0;     // critical zone length (crossings)
  double ty = 3.0;     // yellow-phase duration (crossing-light)
  double tar = 2.0;    // all-red duration (crossing-light)
  double x_e_fixed = 13.5;  // ego start distance for lane change
};

VistaContext context_for(VistaKind kind);

// Largest speed from which a full stop fits within distance d.
double max_caution_speed(const ADFunctions& ad, double d, double tol = 1e-3);

double initial_ego_distance(const VistaContext& ctx, const ADFunctions& ad, double ve);

struct CriticalValues {
  double x_e = 0.0;
  std::optional<double> x_a_hat;  // absent for crossing-light
  double x_f_hat = 0.0;
  bool feasible = true;  // crossing-light: zone can be crossed within the light budget
};

CriticalValues critical_values(const VistaContext& ctx, const ADFunctions& ad, double ve);

struct TestCase {
  VistaKind kind = VistaKind::merging;
  std::string profile;  // ego capability preset
  double ve = 0.0;
  double xe = 0.0;
  std::optional<double> xa;  // absent for crossing-light
  double xf = 0.0;
};

json test_case_to_json(const TestCase& tc);
TestCase test_case_from_json(const json& j);

struct GridSpec {
  double lo = 0.0;
  double hi = 320.0;
  double step = 40.0;
  double refine_step = 5.0;
  std::vector<double> ve_values;  // defaults per kind when empty
};

std::vector<double> default_ve_values(VistaKind kind);

// Base grid: all (xa, xf) combinations, with the jointly-undersized corner
// removed for merging and lane change (xa + xf < B(vl) cannot be laid out).
std::vector<TestCase> generate_grid(const VistaContext& ctx, const ADFunctions& ad,
                                    const std::string& profile, double ve, const GridSpec& spec);

// Axis positions midway (at refine_step spacing) between two existing cases.
std::vector<double> refinement_fill(double lo, double hi, double refine_step);

}  // namespace vistatest
