#include "vistatest/metric_map.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "vistatest/io.h"

namespace vistatest {

namespace {

double dist(const Vec2& a, const Vec2& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

std::vector<double> leg_lengths(const std::vector<Vec2>& points) {
  std::vector<double> out;
  out.reserve(points.size() - 1);
  for (size_t i = 1; i < points.size(); ++i) out.push_back(dist(points[i - 1], points[i]));
  return out;
}

}  // namespace

bool almost_equal(const Vec2& a, const Vec2& b, double tol) {
  return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol;
}

double Segment::length() const {
  return std::accumulate(pieces.begin(), pieces.end(), 0.0);
}

Segment make_line(const std::string& id, double length, Vec2 start, Vec2 dir) {
  if (length <= 0.0) throw std::invalid_argument("segment length must be positive: " + id);
  double n = std::hypot(dir.x, dir.y);
  if (n <= 0.0) throw std::invalid_argument("segment direction must be nonzero: " + id);
  Vec2 end{start.x + dir.x / n * length, start.y + dir.y / n * length};
  Segment s;
  s.id = id;
  s.points = {start, end};
  s.pieces = {length};
  return s;
}

Segment make_polyline(const std::string& id, const std::vector<Vec2>& points) {
  if (points.size() < 2) throw std::invalid_argument("polyline needs at least two points: " + id);
  Segment s;
  s.id = id;
  s.points = points;
  s.pieces = leg_lengths(points);
  for (double p : s.pieces)
    if (p <= 0.0) throw std::invalid_argument("polyline has a zero-length leg: " + id);
  return s;
}

std::optional<Segment> concat(const Segment& s1, const Segment& s2) {
  if (!almost_equal(s1.end(), s2.start())) return std::nullopt;
  Segment out;
  out.id = s1.id + "+" + s2.id;
  out.points = s1.points;
  out.points.insert(out.points.end(), s2.points.begin() + 1, s2.points.end());
  out.pieces = s1.pieces;
  out.pieces.insert(out.pieces.end(), s2.pieces.begin(), s2.pieces.end());
  return out;
}

std::pair<Segment, Segment> split(const Segment& s, double a) {
  double len = s.length();
  if (a < 0.0 || a > len) throw std::out_of_range("split point outside segment: " + format_double(a));
  Segment head, tail;
  head.id = s.id + ".1";
  tail.id = s.id + ".2";
  double acc = 0.0;
  size_t i = 0;
  for (; i < s.pieces.size(); ++i) {
    if (acc + s.pieces[i] >= a) break;
    acc += s.pieces[i];
  }
  if (i == s.pieces.size()) i = s.pieces.size() - 1;  // a == len with rounding slack
  double within = a - acc;
  double frac = within / s.pieces[i];
  Vec2 cut{s.points[i].x + (s.points[i + 1].x - s.points[i].x) * frac,
           s.points[i].y + (s.points[i + 1].y - s.points[i].y) * frac};

  head.points.assign(s.points.begin(), s.points.begin() + i + 1);
  head.points.push_back(cut);
  tail.points.push_back(cut);
  tail.points.insert(tail.points.end(), s.points.begin() + i + 1, s.points.end());

  // Remove degenerate legs created when the cut lands on a vertex.
  auto dedupe = [](std::vector<Vec2>& pts) {
    std::vector<Vec2> out;
    for (const auto& p : pts)
      if (out.empty() || !almost_equal(out.back(), p, 1e-12)) out.push_back(p);
    pts = out;
  };
  dedupe(head.points);
  dedupe(tail.points);
  if (head.points.size() < 2) head.points = {cut, cut};
  if (tail.points.size() < 2) tail.points = {cut, cut};

  auto lengths_or_zero = [](const std::vector<Vec2>& pts) {
    std::vector<double> ls = leg_lengths(pts);
    if (ls.empty()) ls.push_back(0.0);
    return ls;
  };
  head.pieces = lengths_or_zero(head.points);
  tail.pieces = lengths_or_zero(tail.points);
  return {head, tail};
}

RouteEnd::RouteEnd(double r)
    : std::runtime_error("advance runs off the route end, remainder " + format_double(r)),
      remainder(r) {}

const Segment& MetricGraph::segment(const std::string& id) const {
  auto it = segments.find(id);
  if (it == segments.end()) throw std::invalid_argument("unknown segment: " + id);
  return it->second;
}

const Edge& MetricGraph::edge_of(const std::string& segment_id) const {
  for (const auto& e : edges)
    if (e.segment == segment_id) return e;
  throw std::invalid_argument("no edge for segment: " + segment_id);
}

double route_length(const MetricGraph& g, const Route& route) {
  double total = 0.0;
  for (const auto& id : route) total += g.segment(id).length();
  return total;
}

double route_offset(const MetricGraph& g, const Position& p, const Route& route) {
  double acc = 0.0;
  for (const auto& id : route) {
    if (id == p.segment) {
      double len = g.segment(id).length();
      if (p.offset < -1e-9 || p.offset > len + 1e-9)
        throw std::invalid_argument("offset outside segment " + id + ": " + format_double(p.offset));
      return acc + p.offset;
    }
    acc += g.segment(id).length();
  }
  throw std::invalid_argument("position segment not on route: " + p.segment);
}

Position at_chainage(const MetricGraph& g, const Route& route, double chainage) {
  if (route.empty()) throw std::invalid_argument("empty route");
  if (chainage < 0.0) throw std::out_of_range("negative chainage: " + format_double(chainage));
  double remaining = chainage;
  for (size_t i = 0; i < route.size(); ++i) {
    double len = g.segment(route[i]).length();
    if (remaining < len || (i + 1 == route.size() && remaining <= len + 1e-9))
      return {route[i], std::min(remaining, len)};
    remaining -= len;
  }
  throw RouteEnd(remaining);
}

Position advance(const MetricGraph& g, const Position& p, double d, const Route& route) {
  if (d < 0.0) throw std::invalid_argument("advance distance must be nonnegative");
  double start = route_offset(g, p, route);
  return at_chainage(g, route, start + d);
}

namespace {

struct DegreeInfo {
  int in = 0;
  int out = 0;
  bool touches_junction_edge = false;
};

}  // namespace

Decomposition decompose(const MetricGraph& g) {
  std::map<std::string, DegreeInfo> deg;
  for (const auto& v : g.vertices) deg[v];
  for (const auto& e : g.edges) {
    deg[e.from].out++;
    deg[e.to].in++;
    if (e.junction) {
      deg[e.from].touches_junction_edge = true;
      deg[e.to].touches_junction_edge = true;
    }
  }

  auto interior = [&](const std::string& v) {
    const auto& d = deg.at(v);
    return d.in == 1 && d.out == 1 && !d.touches_junction_edge;
  };

  std::map<std::string, const Edge*> out_by_from;  // within the road edge set only
  for (const auto& e : g.edges)
    if (!e.junction) out_by_from[e.from] = &e;

  Decomposition out;
  std::set<std::string> used;
  for (const auto& e : g.edges) {
    if (e.junction || used.count(e.segment)) continue;
    if (interior(e.from)) continue;  // swallowed by the chain through its predecessor
    std::vector<Edge> chain{e};
    used.insert(e.segment);
    std::string v = e.to;
    while (interior(v) && out_by_from.count(v)) {
      const Edge* nxt = out_by_from.at(v);
      if (used.count(nxt->segment)) break;
      chain.push_back(*nxt);
      used.insert(nxt->segment);
      v = nxt->to;
    }
    out.roads.push_back(std::move(chain));
  }
  // Any road edge left over belongs to a cycle; emit each remaining chain as-is.
  for (const auto& e : g.edges) {
    if (e.junction || used.count(e.segment)) continue;
    std::vector<Edge> chain{e};
    used.insert(e.segment);
    std::string v = e.to;
    while (out_by_from.count(v) && !used.count(out_by_from.at(v)->segment)) {
      const Edge* nxt = out_by_from.at(v);
      chain.push_back(*nxt);
      used.insert(nxt->segment);
      v = nxt->to;
    }
    out.roads.push_back(std::move(chain));
  }

  // Junction groups: weakly connected components over junction edges.
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& v) -> std::string {
    auto it = parent.find(v);
    if (it == parent.end() || it->second == v) {
      parent[v] = v;
      return v;
    }
    return parent[v] = find(it->second);
  };
  for (const auto& e : g.edges)
    if (e.junction) parent[find(e.from)] = find(e.to);

  std::map<std::string, std::vector<Edge>> groups;
  for (const auto& e : g.edges)
    if (e.junction) groups[find(e.from)].push_back(e);

  for (auto& [root, edges] : groups) {
    // Validate: every vertex where a path enters the group reaches some exit.
    std::set<std::string> verts;
    std::map<std::string, std::vector<std::string>> adj;
    std::map<std::string, int> in_within, out_within;
    for (const auto& e : edges) {
      verts.insert(e.from);
      verts.insert(e.to);
      adj[e.from].push_back(e.to);
      in_within[e.to]++;
      out_within[e.from]++;
    }
    auto is_entry = [&](const std::string& v) {
      if (in_within[v] == 0 && out_within[v] > 0) return true;
      for (const auto& e : g.edges)
        if (!e.junction && e.to == v) return true;
      return false;
    };
    auto is_exit = [&](const std::string& v) {
      if (out_within[v] == 0) return true;
      for (const auto& e : g.edges)
        if (!e.junction && e.from == v) return true;
      return false;
    };
    for (const auto& v : verts) {
      if (!is_entry(v)) continue;
      std::set<std::string> seen{v};
      std::vector<std::string> stack{v};
      bool ok = false;
      while (!stack.empty() && !ok) {
        std::string cur = stack.back();
        stack.pop_back();
        if (is_exit(cur)) {
          ok = true;
          break;
        }
        for (const auto& nxt : adj[cur])
          if (seen.insert(nxt).second) stack.push_back(nxt);
      }
      if (!ok)
        throw std::runtime_error("junction has no exit reachable from vertex " + v);
    }
    out.junctions.push_back(std::move(edges));
  }
  return out;
}

std::string to_string(VistaKind k) {
  switch (k) {
    case VistaKind::merging: return "merging";
    case VistaKind::lane_change: return "lane-change";
    case VistaKind::crossing_yield: return "crossing-yield";
    case VistaKind::crossing_light: return "crossing-light";
  }
  throw std::logic_error("bad vista kind");
}

VistaKind vista_kind_from_string(const std::string& s) {
  if (s == "merging") return VistaKind::merging;
  if (s == "lane-change") return VistaKind::lane_change;
  if (s == "crossing-yield") return VistaKind::crossing_yield;
  if (s == "crossing-light") return VistaKind::crossing_light;
  throw std::invalid_argument("unknown vista kind: " + s);
}

namespace {

void add_edge(ContextMap& m, const Segment& s, const std::string& from, const std::string& to,
              bool junction) {
  m.graph.vertices.insert(from);
  m.graph.vertices.insert(to);
  m.graph.edges.push_back({from, s.id, to, junction});
  m.graph.segments[s.id] = s;
}

}  // namespace

ContextMap build_context_map(VistaKind kind, const ContextParams& params) {
  ContextMap m;
  m.kind = kind;
  m.params = params;
  const double ap = params.approach;
  const double tail = params.exit_tail;

  switch (kind) {
    case VistaKind::merging: {
      const double connector = 15.0;
      const double arr_connector = 20.0;
      Vec2 mv{0.0, 0.0};
      add_edge(m, make_line("ego_approach", ap, {-(ap + connector), 0.0}), "e0", "jin_e", false);
      add_edge(m, make_line("ego_merge", connector, {-connector, 0.0}), "jin_e", "m", true);
      add_edge(m, make_line("exit", tail, mv), "m", "x_end", false);
      Vec2 u{std::cos(-M_PI / 6.0), std::sin(-M_PI / 6.0)};  // arriving comes in at 30 degrees
      Vec2 jin_a{-arr_connector * u.x, -arr_connector * u.y};
      Vec2 a0{jin_a.x - ap * u.x, jin_a.y - ap * u.y};
      add_edge(m, make_line("arr_approach", ap, a0, u), "a0", "jin_a", false);
      add_edge(m, make_line("arr_merge", arr_connector, jin_a, u), "jin_a", "m", true);
      m.ego_route = {"ego_approach", "ego_merge", "exit"};
      m.arriving_route = {"arr_approach", "arr_merge", "exit"};
      m.ego_conflict = ap + connector;
      m.ego_zone_entry = m.ego_conflict;
      m.ego_zone_exit = m.ego_conflict;
      m.arr_conflict = ap + arr_connector;
      m.arr_zone_entry = m.arr_conflict;
      m.arr_zone_exit = m.arr_conflict;
      m.landmarks["merge_point"] = {"exit", 0.0};
      m.landmarks["ego_spawn_anchor"] = {"ego_approach", 0.0};
      m.landmarks["arriving_spawn_anchor"] = {"arr_approach", 0.0};
      break;
    }
    case VistaKind::lane_change: {
      const double change = params.lane_change_path;
      const double lane_gap = 3.5;
      const double arr_connector = 20.0;
      double dx = std::sqrt(change * change - lane_gap * lane_gap);
      Vec2 jin_e{-dx, -lane_gap};
      Vec2 e0{jin_e.x - ap, jin_e.y};
      add_edge(m, make_line("ego_lane", ap, e0), "e0", "jin_e", false);
      add_edge(m, make_polyline("change_path", {jin_e, {0.0, 0.0}}), "jin_e", "m", true);
      add_edge(m, make_line("outer_exit", tail, {0.0, 0.0}), "m", "x_end", false);
      add_edge(m, make_line("inner_cont", tail, jin_e), "jin_e", "i_end", false);
      add_edge(m, make_line("arr_approach", ap, {-arr_connector - ap, 0.0}), "a0", "jin_a", false);
      add_edge(m, make_line("arr_connector", arr_connector, {-arr_connector, 0.0}), "jin_a", "m",
               true);
      m.ego_route = {"ego_lane", "change_path", "outer_exit"};
      m.arriving_route = {"arr_approach", "arr_connector", "outer_exit"};
      m.inner_route = {"ego_lane", "inner_cont"};
      m.ego_conflict = ap + change;
      m.ego_zone_entry = m.ego_conflict;
      m.ego_zone_exit = m.ego_conflict;
      m.arr_conflict = ap + arr_connector;
      m.arr_zone_entry = m.arr_conflict;
      m.arr_zone_exit = m.arr_conflict;
      m.landmarks["merge_point"] = {"outer_exit", 0.0};
      m.landmarks["ego_spawn_anchor"] = {"ego_lane", 0.0};
      m.landmarks["arriving_spawn_anchor"] = {"arr_approach", 0.0};
      break;
    }
    case VistaKind::crossing_yield:
    case VistaKind::crossing_light: {
      const double half = params.cd / 2.0;
      add_edge(m, make_line("ego_approach", ap, {-(ap + half), 0.0}), "e0", "jc_in_e", false);
      add_edge(m, make_line("ego_cross_in", half, {-half, 0.0}), "jc_in_e", "cx", true);
      add_edge(m, make_line("ego_cross_out", half, {0.0, 0.0}), "cx", "jc_out_e", true);
      add_edge(m, make_line("ego_exit", tail, {half, 0.0}), "jc_out_e", "x_end", false);
      add_edge(m, make_line("arr_approach", ap, {0.0, -(ap + half)}, {0.0, 1.0}), "a0", "jc_in_a",
               false);
      add_edge(m, make_line("arr_cross_in", half, {0.0, -half}, {0.0, 1.0}), "jc_in_a", "cx", true);
      add_edge(m, make_line("arr_cross_out", half, {0.0, 0.0}, {0.0, 1.0}), "cx", "jc_out_a", true);
      add_edge(m, make_line("arr_exit", tail, {0.0, half}, {0.0, 1.0}), "jc_out_a", "a_end", false);
      m.ego_route = {"ego_approach", "ego_cross_in", "ego_cross_out", "ego_exit"};
      if (kind == VistaKind::crossing_yield)
        m.arriving_route = {"arr_approach", "arr_cross_in", "arr_cross_out", "arr_exit"};
      m.ego_zone_entry = ap;
      m.ego_conflict = ap + half;
      m.ego_zone_exit = ap + params.cd;
      m.arr_zone_entry = ap;
      m.arr_conflict = ap + half;
      m.arr_zone_exit = ap + params.cd;
      m.landmarks["zone_entry"] = {"ego_cross_in", 0.0};
      m.landmarks["zone_exit"] = {"ego_exit", 0.0};
      m.landmarks["conflict_point"] = {"ego_cross_out", 0.0};
      m.landmarks["ego_spawn_anchor"] = {"ego_approach", 0.0};
      m.landmarks["arriving_spawn_anchor"] = {"arr_approach", 0.0};
      if (kind == VistaKind::crossing_yield)
        m.landmarks["yield_sign"] = {"ego_cross_in", 0.0};
      else {
        m.landmarks["light_ego"] = {"ego_cross_in", 0.0};
        m.landmarks["light_side"] = {"arr_cross_in", 0.0};
      }
      break;
    }
  }

  m.ego_route_length = route_length(m.graph, m.ego_route);
  if (!m.arriving_route.empty()) m.arr_route_length = route_length(m.graph, m.arriving_route);
  if (!m.inner_route.empty()) m.inner_route_length = route_length(m.graph, m.inner_route);
  return m;
}

std::string dump_map_json(const ContextMap& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["params"] = {{"vl", m.params.vl},
                 {"cd", m.params.cd},
                 {"lane_change_path", m.params.lane_change_path},
                 {"approach", m.params.approach},
                 {"exit_tail", m.params.exit_tail}};
  j["vertices"] = json::array();
  for (const auto& v : m.graph.vertices) j["vertices"].push_back(v);
  j["edges"] = json::array();
  for (const auto& e : m.graph.edges)
    j["edges"].push_back({{"from", e.from},
                          {"segment", e.segment},
                          {"to", e.to},
                          {"junction", e.junction},
                          {"length", m.graph.segment(e.segment).length()}});
  j["segments"] = json::array();
  for (const auto& [id, s] : m.graph.segments) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y});
    j["segments"].push_back({{"id", id}, {"points", pts}, {"pieces", s.pieces}});
  }
  j["routes"] = {{"ego", m.ego_route}, {"arriving", m.arriving_route}, {"inner", m.inner_route}};
  j["landmarks"] = json::object();
  for (const auto& [name, p] : m.landmarks)
    j["landmarks"][name] = {{"segment", p.segment}, {"offset", p.offset}};
  j["chainages"] = {{"ego_zone_entry", m.ego_zone_entry},
                    {"ego_zone_exit", m.ego_zone_exit},
                    {"ego_conflict", m.ego_conflict},
                    {"arr_zone_entry", m.arr_zone_entry},
                    {"arr_zone_exit", m.arr_zone_exit},
                    {"arr_conflict", m.arr_conflict},
                    {"ego_route_length", m.ego_route_length},
                    {"arr_route_length", m.arr_route_length}};
  return j.dump(2) + "\n";
}

}  // namespace vistatest
