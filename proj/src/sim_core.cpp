#include "vistatest/sim_core.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vistatest/autopilot_bridge.h"
#include "vistatest/io.h"
#include "vistatest/oracle.h"

namespace vistatest {

LightSchedule light_schedule_for(const VistaContext& ctx, double dt) {
  LightSchedule s;
  if (ctx.kind != VistaKind::crossing_light) return s;
  s.present = true;
  s.yellow_at = dt;
  s.red_at = ctx.ty + dt;
  s.side_green_at = ctx.ty + ctx.tar + dt;
  return s;
}

LightColor ego_light_at(const LightSchedule& s, double time) {
  if (!s.present) return LightColor::green;
  if (time < s.yellow_at) return LightColor::green;
  if (time < s.red_at) return LightColor::yellow;
  return LightColor::red;
}

LightColor side_light_at(const LightSchedule& s, double time) {
  if (!s.present) return LightColor::red;
  return time < s.side_green_at ? LightColor::red : LightColor::green;
}

const VehicleState* WorldState::find(const std::string& id) const {
  for (const auto& v : vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

VehicleState* WorldState::find(const std::string& id) {
  for (auto& v : vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

ContextMap build_scenario_map(const VistaContext& ctx) {
  ContextParams params;
  params.vl = ctx.vl;
  if (ctx.cd > 0) params.cd = ctx.cd;
  params.lane_change_path = ctx.x_e_fixed;
  return build_context_map(ctx.kind, params);
}

WorldState init_scenario(const ScenarioConfig& cfg, const ADFunctions& ego_ad) {
  if (cfg.ctx.kind != cfg.tc.kind)
    throw std::invalid_argument("scenario context does not match the test case kind");
  WorldState w;
  w.map = build_scenario_map(cfg.ctx);
  const ContextMap& map = w.map;
  const double L = cfg.vehicle_length;

  VehicleState ego;
  ego.id = "ego";
  ego.route = cfg.tc.kind == VistaKind::lane_change ? map.inner_route : map.ego_route;
  ego.conflict = map.ego_conflict;
  ego.zone_entry = map.ego_zone_entry;
  ego.zone_exit = map.ego_zone_exit;
  ego.chainage = map.ego_zone_entry - cfg.tc.xe;
  if (ego.chainage < L)
    throw std::invalid_argument("ego start distance exceeds the approach road");
  ego.kin.v = cfg.tc.ve;
  if (ego.kin.v <= cfg.stall_speed) ego.stopped_since = 0.0;
  w.vehicles.push_back(ego);

  if (cfg.tc.xa && !map.arriving_route.empty()) {
    VehicleState a;
    a.id = "arriving";
    a.route = map.arriving_route;
    a.conflict = map.arr_conflict;
    a.zone_entry = map.arr_zone_entry;
    a.zone_exit = map.arr_zone_exit;
    bool crossing =
        cfg.tc.kind == VistaKind::crossing_yield || cfg.tc.kind == VistaKind::crossing_light;
    double anchor = crossing ? map.arr_zone_entry : map.arr_conflict;
    a.chainage = anchor - *cfg.tc.xa;
    if (a.chainage < L)
      throw std::invalid_argument("arriving start distance exceeds its approach road");
    a.kin.v = cfg.ctx.vl;
    w.vehicles.push_back(a);
  }

  {
    VehicleState f;
    f.id = "front";
    f.route = map.ego_route;
    f.conflict = map.ego_conflict;
    f.zone_entry = map.ego_zone_entry;
    f.zone_exit = map.ego_zone_exit;
    f.chainage = map.ego_zone_exit + cfg.tc.xf + L;
    f.kin.v = 0.0;
    f.stopped_since = 0.0;
    w.vehicles.push_back(f);
  }

  if (cfg.tc.kind == VistaKind::lane_change) {
    VehicleState in;
    in.id = "inner";
    in.route = map.inner_route;
    in.conflict = map.ego_conflict;
    in.zone_entry = map.ego_zone_entry;
    in.zone_exit = map.ego_zone_exit;
    in.chainage = ego.chainage + ego_ad.braking_distance(cfg.tc.ve) + cfg.margins.follow_gap + L;
    in.kin.v = 0.0;
    in.stopped_since = 0.0;
    in.collidable = false;
    w.vehicles.push_back(in);
  }

  LightSchedule sched = light_schedule_for(cfg.ctx, cfg.dt);
  w.ego_light = ego_light_at(sched, 0.0);
  w.side_light = side_light_at(sched, 0.0);
  return w;
}

namespace {

Snapshot make_snapshot(const WorldState& w, const MetricGraph& g, LightColor ego_light,
                       LightColor side_light) {
  Snapshot s;
  s.tick = w.tick;
  s.time = w.time;
  s.ego_light = to_string(ego_light);
  s.side_light = to_string(side_light);
  for (const auto& v : w.vehicles) {
    VehicleSnap vs;
    vs.id = v.id;
    double len = route_length(g, v.route);
    Position p = at_chainage(g, v.route, std::clamp(v.chainage, 0.0, len));
    vs.segment = p.segment;
    vs.offset = p.offset;
    vs.chainage = v.chainage;
    vs.v = v.kin.v;
    vs.mode = to_string(v.last_mode);
    vs.committed = v.committed;
    vs.collidable = v.collidable;
    vs.conflict_coord = v.chainage - v.conflict;
    vs.entry_coord = v.chainage - v.zone_entry;
    vs.exit_coord = v.chainage - v.zone_exit;
    s.vehicles.push_back(vs);
  }
  return s;
}

bool arriving_settled(const WorldState& w, const ScenarioConfig& cfg) {
  const VehicleState* a = w.find("arriving");
  if (!a) return true;
  if (a->kin.v <= cfg.stall_speed) return true;
  return a->chainage > a->zone_exit + cfg.vehicle_length;
}

// True once nothing in the scene can change the ego's options any more:
// every vehicle is either stopped or has run off the end of its route. A
// stalled verdict issued before this point could flip if the sim ran longer.
bool scene_quiescent(const WorldState& w, const ScenarioConfig& cfg) {
  for (const auto& v : w.vehicles) {
    if (v.kin.v <= cfg.stall_speed) continue;
    if (v.reached_route_end) continue;
    return false;
  }
  return true;
}

}  // namespace

Trace run_scenario_with(const ScenarioConfig& cfg, EgoPolicy& policy) {
  ADFunctions ego_ad = ADFunctions::preset(cfg.tc.profile);
  ADFunctions arr_ad = ADFunctions::preset(
      cfg.arriving_profile.empty() ? cfg.tc.profile : cfg.arriving_profile);
  WorldState w = init_scenario(cfg, ego_ad);
  if (VehicleState* arr = w.find("arriving")) {
    Vista spawn_view = simplify(build_vista(w, "arriving", cfg.vis));
    arr->kin.v = std::min(
        arr->kin.v,
        arriving_spawn_speed(arr_ad, spawn_view, cfg.ctx.vl, cfg.margins.follow_gap));
    if (arr->kin.v <= cfg.stall_speed) arr->stopped_since = 0.0;
  }
  const ContextMap& map = w.map;
  const MetricGraph& g = map.graph;
  LightSchedule sched = light_schedule_for(cfg.ctx, cfg.dt);
  const double L = cfg.vehicle_length;
  const int max_ticks = static_cast<int>(std::llround(cfg.t_max / cfg.dt));

  Trace tr;
  tr.meta.tc = cfg.tc;
  tr.meta.ctx = cfg.ctx;
  tr.meta.policy = to_string(cfg.policy);
  tr.meta.dt = cfg.dt;
  tr.meta.t_max = cfg.t_max;
  tr.meta.vehicle_length = L;
  tr.meta.stall_speed = cfg.stall_speed;
  tr.meta.stall_horizon = cfg.stall_horizon;
  tr.meta.zone_eps = cfg.zone_eps;
  tr.meta.schedule = sched;

  ArrivingController arr_ctl;
  PolicyEnv ego_env{cfg.ctx,         ego_ad, sched,           cfg.margins,
                    cfg.dt,          L,      0.0,             map.ego_zone_entry,
                    map.ego_zone_exit, map.ego_conflict};
  PolicyEnv arr_env{cfg.ctx,         arr_ad, sched,           cfg.margins,
                    cfg.dt,          L,      0.0,             map.arr_zone_entry,
                    map.arr_zone_exit, map.arr_conflict};

  bool prev_in_zone[8] = {};
  std::string termination;

  for (int k = 0;; ++k) {
    w.tick = k;
    w.time = k * cfg.dt;
    LightColor eg = ego_light_at(sched, w.time);
    LightColor sd = side_light_at(sched, w.time);
    if (sched.present && (eg != w.ego_light || sd != w.side_light)) {
      tr.events.push_back({k, "light-change", "",
                           0.0, "ego:" + to_string(eg) + " side:" + to_string(sd)});
    }
    w.ego_light = eg;
    w.side_light = sd;

    Vista ego_vista = simplify(build_vista(w, "ego", cfg.vis));
    Vista arr_vista;
    bool have_arr = w.find("arriving") != nullptr;
    if (have_arr) arr_vista = simplify(build_vista(w, "arriving", cfg.vis));

    ego_env.time = w.time;
    arr_env.time = w.time;

    KinematicCommand ego_cmd{CommandMode::hold, std::nullopt};
    try {
      ego_cmd = policy.decide(ego_vista, ego_env);
    } catch (const PolicyFailure& e) {
      tr.events.push_back({k, "software-failure", "ego", 0.0, e.what()});
      termination = "software-failure";
      tr.steps.push_back(make_snapshot(w, g, eg, sd));
      break;
    }
    KinematicCommand arr_cmd{CommandMode::hold, std::nullopt};
    if (have_arr) arr_cmd = arr_ctl.decide(arr_vista, arr_env);

    VehicleState* ego = w.find("ego");
    if (!ego->committed) {
      bool fire = ego_cmd.mode == CommandMode::accelerate;
      // A maneuver begun at the zone boundary opens with track/brake
      // commands, not acceleration; crossing the entry line is itself the
      // observable commitment for the fixed-path kinds.
      if (!fire && cfg.tc.kind != VistaKind::lane_change &&
          ego->chainage - ego->zone_entry > cfg.zone_eps)
        fire = true;
      if (!fire && cfg.tc.kind == VistaKind::lane_change &&
          (ego_cmd.mode == CommandMode::hold || ego_cmd.mode == CommandMode::track_speed)) {
        KinematicState preview = ego->kin;
        StepResult next = ego_ad.step(preview, ego_cmd, cfg.dt);
        double gap_next = nearest_front_gap(ego_vista, false) - next.dx;
        if (ego_ad.braking_distance(next.v) > gap_next - cfg.margins.inner_holdback)
          fire = true;
      }
      if (fire) {
        ego->committed = true;
        if (cfg.tc.kind == VistaKind::lane_change) ego->route = map.ego_route;
        tr.events.push_back({k, "commit", "ego", w.time, ""});
      }
    }

    for (auto& v : w.vehicles) {
      if (v.id == "ego") v.last_mode = ego_cmd.mode;
      else if (v.id == "arriving") v.last_mode = arr_cmd.mode;
      else v.last_mode = CommandMode::hold;
    }
    tr.steps.push_back(make_snapshot(w, g, eg, sd));

    double t_post = (k + 1) * cfg.dt;
    for (auto& v : w.vehicles) {
      const ADFunctions& ad = v.id == "arriving" ? arr_ad : ego_ad;
      KinematicCommand cmd{CommandMode::hold, std::nullopt};
      if (v.id == "ego") cmd = ego_cmd;
      else if (v.id == "arriving") cmd = arr_cmd;
      StepResult res = ad.step(v.kin, cmd, cfg.dt);
      v.chainage += res.dx;
      double len = route_length(g, v.route);
      if (v.chainage >= len) {
        v.chainage = len;
        v.reached_route_end = true;
      }
      if (v.kin.v <= cfg.stall_speed) {
        if (v.stopped_since < 0.0) v.stopped_since = t_post;
      } else {
        v.stopped_since = -1.0;
      }
    }

    w.tick = k + 1;
    w.time = t_post;
    LightColor eg2 = ego_light_at(sched, t_post);
    LightColor sd2 = side_light_at(sched, t_post);
    Snapshot post = make_snapshot(w, g, eg2, sd2);

    // Zone transition events for readability of traces.
    for (size_t i = 0; i < post.vehicles.size() && i < 8; ++i) {
      const VehicleSnap& vs = post.vehicles[i];
      if (vs.id != "ego" && vs.id != "arriving") continue;
      bool gate = vs.id != "ego" || cfg.tc.kind != VistaKind::lane_change || vs.committed;
      bool in = gate && footprint_in_zone(vs, cfg.tc.kind, L, cfg.zone_eps);
      if (in && !prev_in_zone[i])
        tr.events.push_back({k + 1, "zone-entry", vs.id, vs.chainage, ""});
      if (!in && prev_in_zone[i])
        tr.events.push_back({k + 1, "zone-exit", vs.id, vs.chainage, ""});
      prev_in_zone[i] = in;
    }

    auto hit = detect_collision(post, cfg.tc.kind, L, cfg.zone_eps);
    if (hit) {
      tr.events.push_back({k + 1, "collision", hit->striker, hit->overlap,
                           hit->striker + ">" + hit->struck});
      termination = "collision";
    } else {
      const VehicleState* e = w.find("ego");
      bool stopped = e->kin.v <= cfg.stall_speed;
      bool rear_clear = e->chainage - L > e->zone_exit + cfg.zone_eps;
      bool ego_done = e->committed && (e->chainage > e->zone_exit + cfg.clearance ||
                                       (stopped && rear_clear));
      if (ego_done && arriving_settled(w, cfg)) {
        termination = "resolved";
      } else if (stopped && e->stopped_since >= 0.0 &&
                 t_post - e->stopped_since >= cfg.stall_horizon &&
                 footprint_blocking(post.vehicles.front(), cfg.tc.kind, L, cfg.zone_eps) &&
                 (cfg.tc.kind != VistaKind::lane_change || e->committed)) {
        tr.events.push_back({k + 1, "stall", "ego", e->chainage, ""});
        termination = "blocked";
      } else if (stopped && e->stopped_since >= 0.0 && t_post - e->stopped_since >= 1.0 &&
                 !e->committed &&
                 !(footprint_blocking(post.vehicles.front(), cfg.tc.kind, L, cfg.zone_eps) &&
                   (cfg.tc.kind != VistaKind::lane_change || e->committed)) &&
                 scene_quiescent(w, cfg)) {
        termination = "stall";
      } else if (k + 1 >= max_ticks) {
        termination = "timeout";
      }
    }
    if (!termination.empty()) {
      tr.steps.push_back(post);
      break;
    }
  }
  tr.meta.termination = termination;
  return tr;
}

Trace run_scenario(const ScenarioConfig& cfg) {
  if (cfg.policy == PolicyKind::external) {
    auto policy = make_external_policy(cfg);
    Trace tr = run_scenario_with(cfg, *policy);
    policy->finish(tr.meta.termination);
    return tr;
  }
  auto policy = make_reference_policy(cfg.policy);
  return run_scenario_with(cfg, *policy);
}

namespace {

json schedule_to_json(const LightSchedule& s) {
  return json{{"present", s.present},
              {"yellow_at", s.yellow_at},
              {"red_at", s.red_at},
              {"side_green_at", s.side_green_at}};
}

LightSchedule schedule_from_json(const json& j) {
  LightSchedule s;
  s.present = j.at("present").get<bool>();
  s.yellow_at = j.at("yellow_at").get<double>();
  s.red_at = j.at("red_at").get<double>();
  s.side_green_at = j.at("side_green_at").get<double>();
  return s;
}

}  // namespace

std::string trace_to_jsonl(const Trace& t) {
  std::string out;
  json meta;
  meta["meta"] = {{"case", test_case_to_json(t.meta.tc)},
                  {"policy", t.meta.policy},
                  {"vl", t.meta.ctx.vl},
                  {"cd", t.meta.ctx.cd},
                  {"ty", t.meta.ctx.ty},
                  {"tar", t.meta.ctx.tar},
                  {"dt", t.meta.dt},
                  {"t_max", t.meta.t_max},
                  {"vehicle_length", t.meta.vehicle_length},
                  {"stall_speed", t.meta.stall_speed},
                  {"stall_horizon", t.meta.stall_horizon},
                  {"zone_eps", t.meta.zone_eps},
                  {"schedule", schedule_to_json(t.meta.schedule)},
                  {"termination", t.meta.termination}};
  out += meta.dump();
  out += "\n";
  for (const auto& s : t.steps) {
    json j;
    j["tick"] = s.tick;
    j["time"] = s.time;
    j["ego_light"] = s.ego_light;
    j["side_light"] = s.side_light;
    j["vehicles"] = json::array();
    for (const auto& v : s.vehicles) {
      j["vehicles"].push_back({{"id", v.id},
                               {"segment", v.segment},
                               {"offset", v.offset},
                               {"chainage", v.chainage},
                               {"v", v.v},
                               {"mode", v.mode},
                               {"committed", v.committed},
                               {"collidable", v.collidable},
                               {"conflict_coord", v.conflict_coord},
                               {"entry_coord", v.entry_coord},
                               {"exit_coord", v.exit_coord}});
    }
    out += j.dump();
    out += "\n";
  }
  json ev;
  ev["events"] = json::array();
  for (const auto& e : t.events)
    ev["events"].push_back({{"tick", e.tick},
                            {"kind", e.kind},
                            {"vehicle", e.vehicle},
                            {"value", e.value},
                            {"note", e.note}});
  out += ev.dump();
  out += "\n";
  return out;
}

Trace trace_from_jsonl(const std::string& text) {
  Trace t;
  std::istringstream in(text);
  std::string line;
  bool have_meta = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("meta")) {
      const json& m = j.at("meta");
      t.meta.tc = test_case_from_json(m.at("case"));
      t.meta.policy = m.at("policy").get<std::string>();
      t.meta.ctx = context_for(t.meta.tc.kind);
      t.meta.ctx.vl = m.at("vl").get<double>();
      t.meta.ctx.cd = m.at("cd").get<double>();
      t.meta.ctx.ty = m.at("ty").get<double>();
      t.meta.ctx.tar = m.at("tar").get<double>();
      t.meta.dt = m.at("dt").get<double>();
      t.meta.t_max = m.at("t_max").get<double>();
      t.meta.vehicle_length = m.at("vehicle_length").get<double>();
      t.meta.stall_speed = m.at("stall_speed").get<double>();
      t.meta.stall_horizon = m.at("stall_horizon").get<double>();
      t.meta.zone_eps = m.at("zone_eps").get<double>();
      t.meta.schedule = schedule_from_json(m.at("schedule"));
      t.meta.termination = m.at("termination").get<std::string>();
      have_meta = true;
      continue;
    }
    if (j.contains("events")) {
      for (const auto& e : j.at("events"))
        t.events.push_back({e.at("tick").get<int>(), e.at("kind").get<std::string>(),
                            e.at("vehicle").get<std::string>(), e.at("value").get<double>(),
                            e.at("note").get<std::string>()});
      continue;
    }
    Snapshot s;
    s.tick = j.at("tick").get<int>();
    s.time = j.at("time").get<double>();
    s.ego_light = j.at("ego_light").get<std::string>();
    s.side_light = j.at("side_light").get<std::string>();
    for (const auto& v : j.at("vehicles")) {
      VehicleSnap vs;
      vs.id = v.at("id").get<std::string>();
      vs.segment = v.at("segment").get<std::string>();
      vs.offset = v.at("offset").get<double>();
      vs.chainage = v.at("chainage").get<double>();
      vs.v = v.at("v").get<double>();
      vs.mode = v.at("mode").get<std::string>();
      vs.committed = v.at("committed").get<bool>();
      vs.collidable = v.at("collidable").get<bool>();
      vs.conflict_coord = v.at("conflict_coord").get<double>();
      vs.entry_coord = v.at("entry_coord").get<double>();
      vs.exit_coord = v.at("exit_coord").get<double>();
      s.vehicles.push_back(vs);
    }
    t.steps.push_back(s);
  }
  if (!have_meta) throw std::runtime_error("trace stream has no meta line");
  return t;
}

}  // namespace vistatest
