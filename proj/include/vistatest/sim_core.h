#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vistatest/criticality.h"
#include "vistatest/metric_map.h"
#include "vistatest/vehicle_dynamics.h"
#include "vistatest/vista.h"

namespace vistatest {

struct PolicyParams {
  double mu = 5.0;              // clearance margin required on top of theory at commit time
  double xf_floor = 7.0;        // least accepted front gap beyond the zone at commit time
  double holdback = 0.5;        // caution hold line short of the entry
  double inner_holdback = 0.25; // lane change: hold short of the inner-lane obstacle
  double stop_margin = 1.0;     // stop this short of the front vehicle
  double move_cap = 12.0;       // longest post-zone reposition move
  double opt_factor = 0.5;      // overoptimistic threshold scaling
  double tail_reserve = 0.1;    // light budget reserved after clearing the zone
  double follow_gap = 5.0;      // arriving-lane envelope gap
};

enum class PolicyKind { worst_case_safe, overcautious, overoptimistic, external };

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

struct LightSchedule {
  bool present = false;
  double yellow_at = 0.0;
  double red_at = 0.0;
  double side_green_at = 0.0;
};

struct ScenarioConfig {
  TestCase tc;
  VistaContext ctx;
  PolicyKind policy = PolicyKind::worst_case_safe;
  std::string arriving_profile;  // empty: same as tc.profile
  double dt = 0.1;
  double t_max = 60.0;
  double vehicle_length = 5.0;
  double stall_speed = 0.01;
  double stall_horizon = 10.0;
  double clearance = 10.0;
  double zone_eps = 1e-6;
  PolicyParams margins;
  VisibilityParams vis;
  std::vector<std::string> agent_command;  // external stdio transport
  std::string tcp_host;                    // external tcp transport
  int tcp_port = 0;
  int tick_deadline_ms = 1000;
  int handshake_timeout_ms = 5000;
};

// Map geometry for a scenario context; the simulator, the bridge handshake,
// and the sweep reports all share this construction.
ContextMap build_scenario_map(const VistaContext& ctx);

LightSchedule light_schedule_for(const VistaContext& ctx, double dt);
LightColor ego_light_at(const LightSchedule& s, double time);
LightColor side_light_at(const LightSchedule& s, double time);

struct VehicleState {
  std::string id;
  Route route;
  double chainage = 0.0;  // of the front point
  KinematicState kin;
  bool committed = false;
  bool collidable = true;
  bool reached_route_end = false;
  CommandMode last_mode = CommandMode::hold;
  double stopped_since = -1.0;  // sim time when the current stand-still began
  // conflict geometry along this vehicle's own route
  double conflict = 0.0;
  double zone_entry = 0.0;
  double zone_exit = 0.0;

  double speed() const { return kin.v; }
};

struct WorldState {
  int tick = 0;
  double time = 0.0;
  ContextMap map;
  std::vector<VehicleState> vehicles;  // ego first
  LightColor ego_light = LightColor::green;
  LightColor side_light = LightColor::red;

  const VehicleState* find(const std::string& id) const;
  VehicleState* find(const std::string& id);
};

struct Event {
  int tick = 0;
  std::string kind;
  std::string vehicle;
  double value = 0.0;
  std::string note;
};

struct VehicleSnap {
  std::string id;
  std::string segment;
  double offset = 0.0;
  double chainage = 0.0;
  double v = 0.0;
  std::string mode;
  bool committed = false;
  bool collidable = true;
  // front-point coordinates relative to this vehicle's own conflict geometry
  double conflict_coord = 0.0;
  double entry_coord = 0.0;
  double exit_coord = 0.0;
};

struct Snapshot {
  int tick = 0;
  double time = 0.0;
  std::vector<VehicleSnap> vehicles;
  std::string ego_light;
  std::string side_light;
};

struct TraceMeta {
  TestCase tc;
  VistaContext ctx;
  std::string policy;
  double dt = 0.1;
  double t_max = 60.0;
  double vehicle_length = 5.0;
  double stall_speed = 0.01;
  double stall_horizon = 10.0;
  double zone_eps = 1e-6;
  LightSchedule schedule;
  std::string termination;  // collision/resolved/stall/blocked/timeout/software-failure
};

struct Trace {
  TraceMeta meta;
  std::vector<Snapshot> steps;
  std::vector<Event> events;
};

std::string trace_to_jsonl(const Trace& t);
Trace trace_from_jsonl(const std::string& text);

struct PolicyEnv {
  const VistaContext& ctx;
  const ADFunctions& ad;
  const LightSchedule& schedule;
  const PolicyParams& margins;
  double dt = 0.1;
  double vehicle_length = 5.0;
  double time = 0.0;
  // chainages along the ego route
  double zone_entry = 0.0;
  double zone_exit = 0.0;
  double conflict = 0.0;
};

// Thrown by a policy when its control source is gone or misbehaving; the run
// terminates as a software failure.
struct PolicyFailure : std::runtime_error {
  explicit PolicyFailure(const std::string& m) : std::runtime_error(m) {}
};

class EgoPolicy {
 public:
  virtual ~EgoPolicy() = default;
  virtual KinematicCommand decide(const Vista& vista, const PolicyEnv& env) = 0;
};

// In-process reference policies (all but external).
std::unique_ptr<EgoPolicy> make_reference_policy(PolicyKind kind);

// Arriving-lane behavior: free flow under a braking envelope, full stop while
// the ego occupies the conflict area.
class ArrivingController {
 public:
  KinematicCommand decide(const Vista& vista, const PolicyEnv& env);
};

// Largest spawn speed from which the arriving vehicle can still stop
// follow_gap short of whatever already blocks its lane.
double arriving_spawn_speed(const ADFunctions& ad, const Vista& vista, double vl,
                            double follow_gap);

WorldState init_scenario(const ScenarioConfig& cfg, const ADFunctions& ego_ad);

Trace run_scenario(const ScenarioConfig& cfg);
Trace run_scenario_with(const ScenarioConfig& cfg, EgoPolicy& policy);

}  // namespace vistatest
