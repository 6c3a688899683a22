#include "vistatest/oracle.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "vistatest/io.h"

namespace vistatest {

namespace {

bool merging_family(VistaKind kind) {
  return kind == VistaKind::merging || kind == VistaKind::lane_change;
}

const VehicleSnap* find_snap(const Snapshot& s, const std::string& id) {
  for (const auto& v : s.vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

// Lane-change zone checks apply to the ego only once it has moved into the
// target lane.
bool ego_gate(const VehicleSnap& v, VistaKind kind) {
  return kind != VistaKind::lane_change || v.id != "ego" || v.committed;
}

}  // namespace

bool footprint_in_zone(const VehicleSnap& s, VistaKind kind, double L, double eps) {
  if (merging_family(kind))
    return s.conflict_coord > eps && s.conflict_coord < L;
  return s.entry_coord > eps && s.exit_coord < L;
}

bool footprint_blocking(const VehicleSnap& s, VistaKind kind, double L, double eps) {
  if (merging_family(kind))
    return s.conflict_coord > eps && s.conflict_coord < L;
  return s.conflict_coord >= 0.0 && s.conflict_coord <= L;
}

std::optional<CollisionHit> detect_collision(const Snapshot& snap, VistaKind kind,
                                             double L, double eps) {
  const VehicleSnap* ego = find_snap(snap, "ego");
  const VehicleSnap* arr = find_snap(snap, "arriving");
  const VehicleSnap* front = find_snap(snap, "front");

  auto overlap_from = [&](const VehicleSnap& a, const VehicleSnap& b, double clip,
                          bool clipped) -> std::optional<CollisionHit> {
    double lo = std::max(a.conflict_coord - L, b.conflict_coord - L);
    if (clipped) lo = std::max(lo, clip);
    double hi = std::min(a.conflict_coord, b.conflict_coord);
    if (hi - lo <= eps) return std::nullopt;
    CollisionHit hit;
    hit.overlap = hi - lo;
    // The striker is the one whose front sits deeper inside the other's body.
    double pen_a = a.conflict_coord <= b.conflict_coord
                       ? std::clamp(a.conflict_coord - (b.conflict_coord - L), 0.0, L)
                       : 0.0;
    double pen_b = b.conflict_coord <= a.conflict_coord
                       ? std::clamp(b.conflict_coord - (a.conflict_coord - L), 0.0, L)
                       : 0.0;
    if (pen_a > pen_b) {
      hit.striker = a.id;
      hit.struck = b.id;
    } else if (pen_b > pen_a) {
      hit.striker = b.id;
      hit.struck = a.id;
    } else {
      // Ties go against the ego.
      bool ego_pair = a.id == "ego" || b.id == "ego";
      hit.striker = ego_pair ? "ego" : a.id;
      hit.struck = hit.striker == a.id ? b.id : a.id;
    }
    return hit;
  };

  if (ego && front && ego->collidable && front->collidable && ego_gate(*ego, kind)) {
    if (auto hit = overlap_from(*ego, *front, 0.0, false)) return hit;
  }
  if (ego && arr && ego->collidable && arr->collidable && ego_gate(*ego, kind)) {
    if (merging_family(kind)) {
      if (auto hit = overlap_from(*ego, *arr, 0.0, true)) return hit;
    } else {
      bool ego_cover = ego->conflict_coord >= 0.0 && ego->conflict_coord <= L;
      bool arr_cover = arr->conflict_coord >= 0.0 && arr->conflict_coord <= L;
      if (ego_cover && arr_cover) {
        CollisionHit hit;
        hit.overlap = std::min(ego->conflict_coord, arr->conflict_coord);
        hit.striker = "";  // decided by crossing order, filled by the caller
        hit.struck = "";
        return hit;
      }
    }
  }
  if (arr && front && arr->collidable && front->collidable && merging_family(kind)) {
    if (auto hit = overlap_from(*arr, *front, 0.0, true)) return hit;
  }
  return std::nullopt;
}

std::vector<PropertyWindow> property_windows(const Trace& trace) {
  const VistaKind kind = trace.meta.tc.kind;
  const double L = trace.meta.vehicle_length;
  const double eps = trace.meta.zone_eps;
  const double stall = trace.meta.stall_speed;

  std::vector<PropertyWindow> out;
  std::map<std::string, int> open;  // property -> start tick
  auto mark = [&](const std::string& prop, bool active, int tick, bool last) {
    auto it = open.find(prop);
    if (active && it == open.end()) {
      open[prop] = tick;
      it = open.find(prop);
    }
    if (it != open.end() && (!active || last)) {
      out.push_back({prop, it->second, active ? tick : tick - 1});
      open.erase(it);
    }
  };

  bool prev_past_entry = false;
  bool prev_ego_in = false;
  bool moved_in_zone = false;
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const Snapshot& s = trace.steps[i];
    bool last = i + 1 == trace.steps.size();
    const VehicleSnap* ego = find_snap(s, "ego");
    const VehicleSnap* arr = find_snap(s, "arriving");
    if (!ego) continue;
    bool ego_in = ego_gate(*ego, kind) && footprint_in_zone(*ego, kind, L, eps);
    bool arr_in = arr && footprint_in_zone(*arr, kind, L, eps);

    // A stop inside the zone only counts against a vehicle that was rolling
    // in this crossing episode; the first ticks of a launch from rest sit
    // below the stall speed without being a stop.
    if (ego_in && !prev_ego_in) moved_in_zone = false;
    if (ego_in && ego->v > stall) moved_in_zone = true;
    prev_ego_in = ego_in;

    mark("p1", ego_in && arr_in, s.tick, last);
    mark("p2", ego_in && moved_in_zone && ego->v <= stall, s.tick, last);

    if (kind == VistaKind::crossing_light) {
      bool past_entry = ego->entry_coord > eps;
      bool crossed_now = past_entry && !prev_past_entry && i > 0;
      bool red_when_crossing = crossed_now && trace.steps[i - 1].ego_light == "red";
      mark("p3", red_when_crossing, s.tick, last);
      bool in_zone_plain = ego->entry_coord > eps && ego->exit_coord < L;
      mark("p4", in_zone_plain && s.side_light == "green", s.tick, last);
      prev_past_entry = past_entry;
    }
  }
  // Close anything still open at the final snapshot.
  for (auto& [prop, start] : open)
    out.push_back({prop, start, trace.steps.empty() ? start : trace.steps.back().tick});
  std::sort(out.begin(), out.end(), [](const PropertyWindow& a, const PropertyWindow& b) {
    if (a.from_tick != b.from_tick) return a.from_tick < b.from_tick;
    return a.property < b.property;
  });
  return out;
}

VerdictRecord evaluate_trace(const Trace& trace) {
  const VistaKind kind = trace.meta.tc.kind;
  const double L = trace.meta.vehicle_length;
  const double eps = trace.meta.zone_eps;
  const double stall = trace.meta.stall_speed;
  const double dt = trace.meta.dt;

  VerdictRecord r;
  r.tc = trace.meta.tc;
  r.policy = trace.meta.policy;
  r.ticks = trace.steps.empty() ? 0 : trace.steps.back().tick;
  r.termination = trace.meta.termination;

  bool software_failure = false;
  int failure_tick = 0;
  for (const auto& e : trace.events) {
    if (e.kind == "software-failure") {
      software_failure = true;
      failure_tick = e.tick;
    }
  }

  // Collision: first snapshot with intersecting footprints.
  std::optional<CollisionHit> hit;
  int hit_tick = 0;
  std::optional<int> ego_cover_tick, arr_cover_tick;
  for (const auto& s : trace.steps) {
    const VehicleSnap* ego = find_snap(s, "ego");
    const VehicleSnap* arr = find_snap(s, "arriving");
    if (ego && !ego_cover_tick && ego->conflict_coord >= 0.0) ego_cover_tick = s.tick;
    if (arr && !arr_cover_tick && arr->conflict_coord >= 0.0) arr_cover_tick = s.tick;
    if (!hit) {
      hit = detect_collision(s, kind, L, eps);
      if (hit) {
        hit_tick = s.tick;
        if (hit->striker.empty()) {
          // Crossing collision: the later center-crosser is at fault.
          int et = ego_cover_tick.value_or(s.tick);
          int at = arr_cover_tick.value_or(s.tick);
          hit->striker = et >= at ? "ego" : "arriving";
          hit->struck = et >= at ? "arriving" : "ego";
        }
      }
    }
  }

  // Blocked: a stand-still covering the conflicting corridor for the full
  // stall horizon.
  bool blocked = false;
  int blocked_tick = 0;
  {
    int streak_start = -1;
    for (const auto& s : trace.steps) {
      const VehicleSnap* ego = find_snap(s, "ego");
      if (!ego) continue;
      if (ego->v <= stall) {
        if (streak_start < 0) streak_start = s.tick;
        bool gate = ego_gate(*ego, kind);
        if (gate && footprint_blocking(*ego, kind, L, eps) &&
            (s.tick - streak_start) * dt >= trace.meta.stall_horizon) {
          blocked = true;
          blocked_tick = s.tick;
          break;
        }
      } else {
        streak_start = -1;
      }
    }
  }

  auto windows = property_windows(trace);
  std::vector<std::string> observed;
  std::optional<int> first_prop_tick;
  for (const auto& w : windows) {
    if (std::find(observed.begin(), observed.end(), w.property) == observed.end())
      observed.push_back(w.property);
    if (!first_prop_tick || w.from_tick < *first_prop_tick) first_prop_tick = w.from_tick;
  }
  std::sort(observed.begin(), observed.end());

  // Behavior class. Progress means claiming the contested zone ahead of the
  // arriving vehicle; slipping through after it has already passed still
  // counts as caution. At a light the commitment shows in the commanded
  // mode before the entry line instead.
  bool progressed = false;
  if (kind == VistaKind::crossing_light) {
    for (const auto& s : trace.steps) {
      const VehicleSnap* ego = find_snap(s, "ego");
      if (!ego) continue;
      if (ego->entry_coord > eps) break;
      if (ego->mode == "accelerate") {
        progressed = true;
        break;
      }
    }
  } else {
    std::optional<int> ego_at, arr_at;
    for (const auto& s : trace.steps) {
      const VehicleSnap* ego = find_snap(s, "ego");
      const VehicleSnap* arr = find_snap(s, "arriving");
      if (ego && !ego_at && ego_gate(*ego, kind) && footprint_in_zone(*ego, kind, L, eps))
        ego_at = s.tick;
      if (arr && !arr_at && footprint_in_zone(*arr, kind, L, eps)) arr_at = s.tick;
    }
    progressed = ego_at.has_value() && (!arr_at || *ego_at < *arr_at);
  }
  r.behavior = progressed ? "progress" : "caution";

  if (software_failure) {
    r.verdict = "Fsw";
    r.suppressed = observed;
    r.first_violation_tick = failure_tick;
    return r;
  }
  if (hit) {
    r.verdict = hit->striker == "ego" ? "Ae" : "Aa";
    r.fault = hit->striker;
    r.suppressed = observed;
    r.first_violation_tick = hit_tick;
    return r;
  }
  if (blocked) {
    r.verdict = "Blk";
    r.suppressed = observed;
    r.first_violation_tick = blocked_tick;
    return r;
  }
  if (!observed.empty()) {
    r.verdict = progressed ? "PU" : "CU";
    r.props = observed;
    r.first_violation_tick = first_prop_tick;
    return r;
  }
  r.verdict = progressed ? "PS" : "CS";
  return r;
}

std::string verdict_cell(const VerdictRecord& r) {
  std::string s = r.verdict;
  for (const auto& p : r.props) s += " " + p;
  return s;
}

json verdict_to_json(const VerdictRecord& r) {
  json j;
  j["case"] = test_case_to_json(r.tc);
  j["policy"] = r.policy;
  j["verdict"] = r.verdict;
  j["behavior"] = r.behavior;
  j["props"] = r.props;
  j["suppressed"] = r.suppressed;
  if (r.first_violation_tick) j["first_violation_tick"] = *r.first_violation_tick;
  if (!r.fault.empty()) j["fault"] = r.fault;
  j["ticks"] = r.ticks;
  j["termination"] = r.termination;
  return j;
}

VerdictRecord verdict_from_json(const json& j) {
  VerdictRecord r;
  r.tc = test_case_from_json(j.at("case"));
  r.policy = j.at("policy").get<std::string>();
  r.verdict = j.at("verdict").get<std::string>();
  r.behavior = j.at("behavior").get<std::string>();
  r.props = j.at("props").get<std::vector<std::string>>();
  r.suppressed = j.at("suppressed").get<std::vector<std::string>>();
  if (j.contains("first_violation_tick"))
    r.first_violation_tick = j.at("first_violation_tick").get<int>();
  if (j.contains("fault")) r.fault = j.at("fault").get<std::string>();
  r.ticks = j.at("ticks").get<int>();
  r.termination = j.at("termination").get<std::string>();
  return r;
}

}  // namespace vistatest
