#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vistatest {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

bool almost_equal(const Vec2& a, const Vec2& b, double tol = 1e-9);

// A directed stretch of lane. A segment is a straight line (two points) or a
// polyline; arc length is the sum of the leg lengths. Vertex points are kept
// so that concatenation can check pose compatibility and split can
// interpolate.
struct Segment {
  std::string id;
  std::vector<Vec2> points;
  std::vector<double> pieces;

  double length() const;
  const Vec2& start() const { return points.front(); }
  const Vec2& end() const { return points.back(); }
};

Segment make_line(const std::string& id, double length, Vec2 start = {}, Vec2 dir = {1.0, 0.0});
Segment make_polyline(const std::string& id, const std::vector<Vec2>& points);

// Partial operation: defined only when s1 ends where s2 starts.
std::optional<Segment> concat(const Segment& s1, const Segment& s2);

// Splits at arc length a, 0 <= a <= length. Throws std::out_of_range otherwise.
std::pair<Segment, Segment> split(const Segment& s, double a);

struct Position {
  std::string segment;
  double offset = 0.0;
};

// Thrown by advance() when the requested distance runs off the end of the
// route; carries the distance that could not be consumed.
struct RouteEnd : std::runtime_error {
  double remainder;
  explicit RouteEnd(double r);
};

struct Edge {
  std::string from;
  std::string segment;
  std::string to;
  bool junction = false;
};

struct MetricGraph {
  std::set<std::string> vertices;
  std::vector<Edge> edges;
  std::map<std::string, Segment> segments;

  const Segment& segment(const std::string& id) const;
  const Edge& edge_of(const std::string& segment_id) const;
};

using Route = std::vector<std::string>;

double route_length(const MetricGraph& g, const Route& route);

// Arc-length coordinate of p measured from the start of the route.
double route_offset(const MetricGraph& g, const Position& p, const Route& route);

Position at_chainage(const MetricGraph& g, const Route& route, double chainage);

Position advance(const MetricGraph& g, const Position& p, double d, const Route& route);

struct Decomposition {
  std::vector<std::vector<Edge>> roads;
  std::vector<std::vector<Edge>> junctions;
};

// Partitions the edges into maximal linear roads and junction groups.
// Junction groups must let every entering path reach an exit; a violation
// throws std::runtime_error naming the offending vertex.
Decomposition decompose(const MetricGraph& g);

enum class VistaKind { merging, lane_change, crossing_yield, crossing_light };

std::string to_string(VistaKind k);
VistaKind vista_kind_from_string(const std::string& s);

struct ContextParams {
  double vl = 22.2;
  double cd = 24.0;
  double lane_change_path = 13.5;
  double approach = 400.0;
  double exit_tail = 400.0;
};

// A ready-to-simulate map for one scenario family, with the conflict
// geometry exposed both as landmark positions and as chainages along the
// ego / arriving routes.
struct ContextMap {
  VistaKind kind = VistaKind::merging;
  ContextParams params;
  MetricGraph graph;
  Route ego_route;
  Route arriving_route;  // empty for crossing-light
  Route inner_route;     // lane-change only: the lane the ego starts in
  std::map<std::string, Position> landmarks;

  // chainages along ego_route
  double ego_zone_entry = 0.0;
  double ego_zone_exit = 0.0;
  double ego_conflict = 0.0;
  double ego_route_length = 0.0;

  // chainages along arriving_route
  double arr_conflict = 0.0;
  double arr_zone_entry = 0.0;
  double arr_zone_exit = 0.0;
  double arr_route_length = 0.0;

  double inner_route_length = 0.0;
};

ContextMap build_context_map(VistaKind kind, const ContextParams& params = {});

std::string dump_map_json(const ContextMap& m);

}  // namespace vistatest
