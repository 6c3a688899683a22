#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vistatest/sim_core.h"

namespace vistatest {

// Footprint tests on a single vehicle snapshot. All coordinates are the
// vehicle's front point relative to its own conflict geometry; the footprint
// extends vehicle_length behind it.
bool footprint_in_zone(const VehicleSnap& s, VistaKind kind, double L, double eps);
bool footprint_blocking(const VehicleSnap& s, VistaKind kind, double L, double eps);

struct CollisionHit {
  std::string striker;
  std::string struck;
  double overlap = 0.0;
};

// Pairwise footprint intersection in conflict-relative coordinates. Lanes
// that join at the conflict point share only the region past it; a full
// shared route shares everything. For crossings the two corridors intersect
// only at the conflict center.
std::optional<CollisionHit> detect_collision(const Snapshot& snap, VistaKind kind,
                                             double L, double eps);

struct PropertyWindow {
  std::string property;
  int from_tick = 0;
  int to_tick = 0;
};

struct VerdictRecord {
  TestCase tc;
  std::string policy;
  std::string verdict;    // PS CS PU CU Ae Aa Blk Fsw
  std::string behavior;   // progress | caution
  std::vector<std::string> props;
  std::vector<std::string> suppressed;
  std::optional<int> first_violation_tick;
  std::string fault;      // striking vehicle for accidents
  int ticks = 0;
  std::string termination;
};

json verdict_to_json(const VerdictRecord& r);
VerdictRecord verdict_from_json(const json& j);

// Grid cell label, e.g. "CU p1 p2".
std::string verdict_cell(const VerdictRecord& r);

std::vector<PropertyWindow> property_windows(const Trace& trace);

VerdictRecord evaluate_trace(const Trace& trace);

}  // namespace vistatest
