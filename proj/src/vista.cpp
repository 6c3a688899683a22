#include "vistatest/vista.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vistatest/io.h"
#include "vistatest/sim_core.h"

namespace vistatest {

std::string to_string(ObstacleKind k) {
  switch (k) {
    case ObstacleKind::vehicle: return "vehicle";
    case ObstacleKind::yield_sign: return "yield-sign";
    case ObstacleKind::traffic_light: return "traffic-light";
    case ObstacleKind::fictitious_front: return "fictitious-front";
    case ObstacleKind::fictitious_arriving: return "fictitious-arriving";
  }
  throw std::logic_error("unknown obstacle kind");
}

ObstacleKind obstacle_kind_from_string(const std::string& s) {
  if (s == "vehicle") return ObstacleKind::vehicle;
  if (s == "yield-sign") return ObstacleKind::yield_sign;
  if (s == "traffic-light") return ObstacleKind::traffic_light;
  if (s == "fictitious-front") return ObstacleKind::fictitious_front;
  if (s == "fictitious-arriving") return ObstacleKind::fictitious_arriving;
  throw std::invalid_argument("unknown obstacle kind: " + s);
}

std::string to_string(LightColor c) {
  switch (c) {
    case LightColor::green: return "green";
    case LightColor::yellow: return "yellow";
    case LightColor::red: return "red";
  }
  throw std::logic_error("unknown light color");
}

LightColor light_color_from_string(const std::string& s) {
  if (s == "green") return LightColor::green;
  if (s == "yellow") return LightColor::yellow;
  if (s == "red") return LightColor::red;
  throw std::invalid_argument("unknown light color: " + s);
}

namespace {

Position position_on(const MetricGraph& g, const Route& route, double chainage) {
  double len = route_length(g, route);
  double c = std::clamp(chainage, 0.0, len);
  return at_chainage(g, route, c);
}

// Chainage of a world position along `route`, if the position's segment is
// part of it.
std::optional<double> chainage_on_route(const MetricGraph& g, const Route& route,
                                        const Position& p) {
  double base = 0.0;
  for (const auto& sid : route) {
    const Segment& s = g.segment(sid);
    if (sid == p.segment) return base + p.offset;
    base += s.length();
  }
  return std::nullopt;
}

bool is_vehicle_like(ObstacleKind k) {
  return k == ObstacleKind::vehicle || k == ObstacleKind::fictitious_front;
}

}  // namespace

Vista build_vista(const WorldState& world, const std::string& vehicle_id,
                  const VisibilityParams& vis) {
  const VehicleState* viewer = world.find(vehicle_id);
  if (!viewer) throw std::invalid_argument("no such vehicle: " + vehicle_id);
  const ContextMap& map = world.map;
  const MetricGraph& g = map.graph;
  const double L = 5.0;

  Vista out;
  out.ego.route = viewer->route;
  out.ego.chainage = viewer->chainage;
  out.ego.position = position_on(g, viewer->route, viewer->chainage);
  out.ego.speed = viewer->speed();
  out.ego.committed = viewer->committed;

  bool viewer_is_ego = viewer->id == "ego";
  // A lane-changing vehicle watches its target lane as well as its own.
  const Route* target_lane = nullptr;
  if (viewer_is_ego && map.kind == VistaKind::lane_change && !viewer->committed)
    target_lane = &map.ego_route;

  // How much of a body whose front is at `p` lies on segments of `route`,
  // walking backwards along the vehicle's own route. A merging vehicle whose
  // front merely touches the junction boundary has zero length on the other
  // lane and does not obstruct it.
  auto body_on_route = [&](const Route& own, const Position& p, const Route& route) {
    double len = p.offset;
    auto it = std::find(own.begin(), own.end(), p.segment);
    while (len < L && it != own.begin()) {
      --it;
      if (std::find(route.begin(), route.end(), *it) == route.end()) break;
      len += g.segment(*it).length();
    }
    return std::min(len, L);
  };

  auto scan_route = [&](const Route& route, bool adjacent) {
    bool have_vehicle = false;
    for (const auto& v : world.vehicles) {
      if (v.id == viewer->id) continue;
      Position p = position_on(g, v.route, v.chainage);
      auto mapped = chainage_on_route(g, route, p);
      if (!mapped) continue;
      if (body_on_route(v.route, p, route) <= 1e-9) continue;
      double dist = (*mapped - L) - viewer->chainage;  // to the other's rear surface
      // On the adjacent lane, bodies reaching back to the viewer's rear
      // matter too: they rule out switching into that lane.
      double keep = adjacent ? 2.0 * L : L;
      if (dist <= -keep + 1e-9 || dist > vis.fd) continue;
      ObstacleView ov;
      ov.kind = ObstacleKind::vehicle;
      ov.id = v.id;
      ov.position = p;
      ov.distance = dist;
      ov.speed = v.speed();
      ov.committed = v.committed;
      ov.adjacent = adjacent;
      out.front.push_back(ov);
      have_vehicle = true;
    }
    ObstacleView fict;
    fict.kind = ObstacleKind::fictitious_front;
    fict.id = adjacent ? "fictitious-front-adjacent" : "fictitious-front";
    fict.position = position_on(g, route, viewer->chainage + vis.fd + L);
    fict.distance = vis.fd;
    fict.speed = 0.0;
    fict.adjacent = adjacent;
    out.front.push_back(fict);
    (void)have_vehicle;
  };

  scan_route(viewer->route, false);
  if (target_lane) scan_route(*target_lane, true);
  if (viewer_is_ego && map.kind == VistaKind::crossing_yield) {
    double d = map.ego_zone_entry - viewer->chainage;
    if (d >= 0.0 && d <= vis.fd) {
      ObstacleView ov;
      ov.kind = ObstacleKind::yield_sign;
      ov.id = "yield-sign";
      ov.position = position_on(g, map.ego_route, map.ego_zone_entry);
      ov.distance = d;
      ov.speed = 0.0;
      out.front.push_back(ov);
    }
  }
  if (viewer_is_ego && map.kind == VistaKind::crossing_light) {
    double d = map.ego_zone_entry - viewer->chainage;
    if (d >= 0.0 && d <= vis.fd) {
      ObstacleView ov;
      ov.kind = ObstacleKind::traffic_light;
      ov.id = "light-ego";
      ov.position = position_on(g, map.ego_route, map.ego_zone_entry);
      ov.distance = d;
      ov.speed = 0.0;
      ov.light = world.ego_light;
      out.front.push_back(ov);
    }
  }

  std::stable_sort(out.front.begin(), out.front.end(),
                   [](const ObstacleView& a, const ObstacleView& b) {
                     return a.distance < b.distance;
                   });

  // Arriving list: traffic approaching the junction on the conflicting route.
  const Route* other_route = nullptr;
  double other_conflict = 0.0;
  std::string other_id;
  if (viewer_is_ego) {
    if (!map.arriving_route.empty()) {
      other_route = &map.arriving_route;
      other_conflict = map.arr_conflict;
      other_id = "arriving";
    }
  } else {
    other_route = &map.ego_route;
    other_conflict = map.ego_conflict;
    other_id = "ego";
  }
  if (other_route) {
    bool crossing = map.kind == VistaKind::crossing_yield || map.kind == VistaKind::crossing_light;
    // Keep an entry visible while its body still straddles the conflict
    // point; for crossings the box is wider than the point, so keep more.
    double keep_past = crossing ? map.params.cd / 2.0 + L + 1.0 : L;
    bool have_real = false;
    const VehicleState* other = world.find(other_id);
    if (other) {
      double d = other_conflict - other->chainage;
      if (d > -keep_past && d <= vis.ld) {
        ArrivingObstacleView av;
        av.state.kind = ObstacleKind::vehicle;
        av.state.id = other->id;
        av.state.position = position_on(g, other->route, other->chainage);
        av.state.distance = d;
        av.state.speed = other->speed();
        av.state.committed = other->committed;
        av.distance_to_conflict = d;
        out.arriving.push_back(av);
        have_real = true;
      }
    }
    if (!have_real) {
      ArrivingObstacleView av;
      av.state.kind = ObstacleKind::fictitious_arriving;
      av.state.id = "fictitious-arriving";
      av.state.position = position_on(g, *other_route, other_conflict - vis.ld);
      av.state.distance = vis.ld;
      av.state.speed = map.params.vl;
      av.distance_to_conflict = vis.ld;
      out.arriving.push_back(av);
    }
  }
  return out;
}

Vista simplify(Vista v) {
  // Occlusion applies per corridor: the nearest vehicle in a lane hides
  // everything behind it in that lane, signs and lights ahead of it stay.
  std::vector<ObstacleView> kept;
  bool own_closed = false;
  bool adj_closed = false;
  for (auto& ov : v.front) {
    bool& closed = ov.adjacent ? adj_closed : own_closed;
    if (closed) continue;
    bool veh = is_vehicle_like(ov.kind);
    kept.push_back(std::move(ov));
    if (veh) closed = true;
  }
  v.front = std::move(kept);
  return v;
}

double nearest_front_gap(const Vista& v, bool adjacent) {
  double own = 1e18, adj = 1e18;
  bool have_adj = false;
  for (const auto& ov : v.front) {
    if (!is_vehicle_like(ov.kind)) continue;
    if (ov.adjacent) {
      adj = std::min(adj, ov.distance);
      have_adj = true;
    } else {
      own = std::min(own, ov.distance);
    }
  }
  if (adjacent) return have_adj ? adj : own;
  return own;
}

std::optional<LightColor> front_light(const Vista& v) {
  for (const auto& ov : v.front)
    if (ov.kind == ObstacleKind::traffic_light) return ov.light;
  return std::nullopt;
}

json vista_to_json(const Vista& v) {
  json j;
  j["ego"] = {{"route", v.ego.route},
              {"segment", v.ego.position.segment},
              {"offset", v.ego.position.offset},
              {"chainage", v.ego.chainage},
              {"speed", v.ego.speed},
              {"committed", v.ego.committed}};
  j["front"] = json::array();
  for (const auto& ov : v.front) {
    json o = {{"kind", to_string(ov.kind)},
              {"id", ov.id},
              {"segment", ov.position.segment},
              {"offset", ov.position.offset},
              {"distance", ov.distance},
              {"speed", ov.speed},
              {"committed", ov.committed},
              {"adjacent", ov.adjacent}};
    if (ov.light) o["light"] = to_string(*ov.light);
    j["front"].push_back(o);
  }
  j["arriving"] = json::array();
  for (const auto& av : v.arriving) {
    j["arriving"].push_back({{"kind", to_string(av.state.kind)},
                             {"id", av.state.id},
                             {"segment", av.state.position.segment},
                             {"offset", av.state.position.offset},
                             {"speed", av.state.speed},
                             {"committed", av.state.committed},
                             {"distance_to_conflict", av.distance_to_conflict}});
  }
  return j;
}

Vista vista_from_json(const json& j) {
  Vista v;
  const json& e = j.at("ego");
  v.ego.route = e.at("route").get<std::vector<std::string>>();
  v.ego.position = {e.at("segment").get<std::string>(), e.at("offset").get<double>()};
  v.ego.chainage = e.at("chainage").get<double>();
  v.ego.speed = e.at("speed").get<double>();
  v.ego.committed = e.at("committed").get<bool>();
  for (const auto& o : j.at("front")) {
    ObstacleView ov;
    ov.kind = obstacle_kind_from_string(o.at("kind").get<std::string>());
    ov.id = o.at("id").get<std::string>();
    ov.position = {o.at("segment").get<std::string>(), o.at("offset").get<double>()};
    ov.distance = o.at("distance").get<double>();
    ov.speed = o.at("speed").get<double>();
    ov.committed = o.value("committed", false);
    ov.adjacent = o.value("adjacent", false);
    if (o.contains("light")) ov.light = light_color_from_string(o.at("light").get<std::string>());
    v.front.push_back(ov);
  }
  for (const auto& o : j.at("arriving")) {
    ArrivingObstacleView av;
    av.state.kind = obstacle_kind_from_string(o.at("kind").get<std::string>());
    av.state.id = o.at("id").get<std::string>();
    av.state.position = {o.at("segment").get<std::string>(), o.at("offset").get<double>()};
    av.state.speed = o.at("speed").get<double>();
    av.state.committed = o.value("committed", false);
    av.distance_to_conflict = o.at("distance_to_conflict").get<double>();
    av.state.distance = av.distance_to_conflict;
    v.arriving.push_back(av);
  }
  return v;
}

}  // namespace vistatest
