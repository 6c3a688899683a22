#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vistatest/io.h"
#include "vistatest/metric_map.h"

namespace vistatest {

struct WorldState;
struct ScenarioConfig;

enum class ObstacleKind {
  vehicle,
  yield_sign,
  traffic_light,
  fictitious_front,
  fictitious_arriving
};

std::string to_string(ObstacleKind k);
ObstacleKind obstacle_kind_from_string(const std::string& s);

enum class LightColor { green, yellow, red };

std::string to_string(LightColor c);
LightColor light_color_from_string(const std::string& s);

struct ObstacleView {
  ObstacleKind kind = ObstacleKind::vehicle;
  std::string id;
  Position position;
  double distance = 0.0;  // along the viewing route, from the viewer's front to the obstacle surface
  double speed = 0.0;
  std::optional<LightColor> light;
  bool committed = false;
  bool adjacent = false;  // seen along the target lane of a lane change, not the current one
};

struct ArrivingObstacleView {
  ObstacleView state;
  double distance_to_conflict = 0.0;  // along the viewed vehicle's own route
};

struct EgoVista {
  Route route;
  Position position;
  double chainage = 0.0;
  double speed = 0.0;
  bool committed = false;
};

struct Vista {
  EgoVista ego;
  std::vector<ObstacleView> front;
  std::vector<ArrivingObstacleView> arriving;
};

struct VisibilityParams {
  double fd = 320.0;
  double ld = 320.0;
};

Vista build_vista(const WorldState& world, const std::string& vehicle_id,
                  const VisibilityParams& vis);

// Drops everything behind the first constraining front obstacle; keeps a sign
// or light together with the first vehicle after it. Idempotent.
Vista simplify(Vista v);

// Distance to the nearest vehicle surface (real or fictitious) ahead in the
// chosen corridor; falls back to the current corridor when no adjacent one is
// in view.
double nearest_front_gap(const Vista& v, bool adjacent = false);
std::optional<LightColor> front_light(const Vista& v);

json vista_to_json(const Vista& v);
Vista vista_from_json(const json& j);

}  // namespace vistatest
