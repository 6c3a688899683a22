#include "vistatest/metric_map.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace vistatest {
namespace {

Segment chain_segment(const std::string& id, std::mt19937& rng, Vec2 start) {
  std::uniform_int_distribution<int> legs(1, 4);
  std::uniform_real_distribution<double> step(0.5, 30.0);
  std::vector<Vec2> pts{start};
  int n = legs(rng);
  for (int i = 0; i < n; ++i) {
    Vec2 p = pts.back();
    p.x += step(rng);
    p.y += step(rng) - 15.0;
    pts.push_back(p);
  }
  return make_polyline(id, pts);
}

TEST(Segment, LengthOfLineAndPolyline) {
  Segment s = make_line("s", 42.5);
  EXPECT_DOUBLE_EQ(s.length(), 42.5);
  Segment p = make_polyline("p", {{0, 0}, {3, 4}, {3, 10}});
  EXPECT_DOUBLE_EQ(p.length(), 11.0);
}

TEST(Segment, ConcatDefinedOnlyWhenPosesMeet) {
  Segment a = make_line("a", 10.0);
  Segment b = make_line("b", 5.0, a.end());
  Segment off = make_line("c", 5.0, {123.0, 4.0});
  ASSERT_TRUE(concat(a, b).has_value());
  EXPECT_FALSE(concat(a, off).has_value());
  EXPECT_FALSE(concat(b, a).has_value());
}

TEST(Segment, ConcatAssociativity) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Segment a = chain_segment("a", rng, {0, 0});
    Segment b = chain_segment("b", rng, a.end());
    Segment c = chain_segment("c", rng, b.end());
    auto left = concat(*concat(a, b), c);
    auto right = concat(a, *concat(b, c));
    ASSERT_TRUE(left.has_value());
    ASSERT_TRUE(right.has_value());
    EXPECT_NEAR(left->length(), right->length(), 1e-9);
    ASSERT_EQ(left->points.size(), right->points.size());
    for (size_t i = 0; i < left->points.size(); ++i)
      EXPECT_TRUE(almost_equal(left->points[i], right->points[i]));
  }
}

TEST(Segment, ConcatAssociativityUndefinedAgrees) {
  // When the inner pair is incompatible, no grouping can be defined.
  Segment a = make_line("a", 10.0);
  Segment b = make_line("b", 5.0, {50.0, 50.0});
  Segment c = make_line("c", 5.0, b.end());
  ASSERT_FALSE(concat(a, b).has_value());
  auto bc = concat(b, c);
  ASSERT_TRUE(bc.has_value());
  EXPECT_FALSE(concat(a, *bc).has_value());
}

TEST(Segment, LengthAdditivityUnderConcat) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Segment a = chain_segment("a", rng, {0, 0});
    Segment b = chain_segment("b", rng, a.end());
    auto ab = concat(a, b);
    ASSERT_TRUE(ab.has_value());
    EXPECT_NEAR(ab->length(), a.length() + b.length(), 1e-9);
  }
}

TEST(Segment, SplitRoundtrip) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Segment s = chain_segment("s", rng, {0, 0});
    std::uniform_real_distribution<double> at(0.0, s.length());
    double a = at(rng);
    auto [head, tail] = split(s, a);
    EXPECT_NEAR(head.length(), a, 1e-9);
    EXPECT_NEAR(head.length() + tail.length(), s.length(), 1e-9);
    auto joined = concat(head, tail);
    ASSERT_TRUE(joined.has_value());
    EXPECT_NEAR(joined->length(), s.length(), 1e-9);
    EXPECT_TRUE(almost_equal(joined->start(), s.start()));
    EXPECT_TRUE(almost_equal(joined->end(), s.end()));
  }
}

TEST(Segment, SplitOutOfRangeThrows) {
  Segment s = make_line("s", 10.0);
  EXPECT_THROW(split(s, -0.5), std::out_of_range);
  EXPECT_THROW(split(s, 10.5), std::out_of_range);
}

MetricGraph three_segment_graph() {
  MetricGraph g;
  g.vertices = {"A", "B", "C", "D"};
  Segment s1 = make_line("s1", 20.0);
  Segment s2 = make_line("s2", 30.0, s1.end());
  Segment s3 = make_line("s3", 25.0, s2.end());
  g.segments = {{"s1", s1}, {"s2", s2}, {"s3", s3}};
  g.edges = {{"A", "s1", "B", false}, {"B", "s2", "C", false}, {"C", "s3", "D", false}};
  return g;
}

TEST(Route, OffsetChainageRoundtrip) {
  MetricGraph g = three_segment_graph();
  Route r{"s1", "s2", "s3"};
  EXPECT_DOUBLE_EQ(route_length(g, r), 75.0);
  for (double c : {0.0, 5.0, 20.0, 35.5, 74.9, 75.0}) {
    Position p = at_chainage(g, r, c);
    EXPECT_NEAR(route_offset(g, p, r), c, 1e-9);
  }
}

TEST(Route, AdvanceAdditivity) {
  MetricGraph g = three_segment_graph();
  Route r{"s1", "s2", "s3"};
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> pick(0.0, 75.0);
  for (int trial = 0; trial < 300; ++trial) {
    double start = pick(rng);
    double a = pick(rng) / 3.0;
    double b = pick(rng) / 3.0;
    Position p = at_chainage(g, r, start);
    bool in_range = start + a + b <= 75.0;
    if (!in_range) {
      EXPECT_THROW(advance(g, advance(g, p, a, r), b, r), RouteEnd);
      EXPECT_THROW(advance(g, p, a + b, r), RouteEnd);
      continue;
    }
    Position two = advance(g, advance(g, p, a, r), b, r);
    Position one = advance(g, p, a + b, r);
    EXPECT_NEAR(route_offset(g, two, r), route_offset(g, one, r), 1e-9);
  }
}

TEST(Route, RouteEndCarriesRemainder) {
  MetricGraph g = three_segment_graph();
  Route r{"s1", "s2", "s3"};
  Position p = at_chainage(g, r, 70.0);
  try {
    advance(g, p, 12.0, r);
    FAIL() << "expected RouteEnd";
  } catch (const RouteEnd& e) {
    EXPECT_NEAR(e.remainder, 7.0, 1e-9);
  }
}

TEST(Decompose, CoversEveryEdgeExactlyOnce) {
  for (VistaKind kind : {VistaKind::merging, VistaKind::lane_change,
                         VistaKind::crossing_yield, VistaKind::crossing_light}) {
    ContextMap m = build_context_map(kind);
    Decomposition d = decompose(m.graph);
    std::map<std::string, int> seen;
    for (const auto& road : d.roads)
      for (const auto& e : road) seen[e.segment]++;
    for (const auto& j : d.junctions)
      for (const auto& e : j) seen[e.segment]++;
    EXPECT_EQ(seen.size(), m.graph.edges.size()) << to_string(kind);
    for (const auto& [id, n] : seen) EXPECT_EQ(n, 1) << id;
  }
}

TEST(ContextMap, ConflictGeometryConsistent) {
  for (VistaKind kind : {VistaKind::merging, VistaKind::lane_change,
                         VistaKind::crossing_yield, VistaKind::crossing_light}) {
    ContextMap m = build_context_map(kind);
    EXPECT_LE(m.ego_zone_entry, m.ego_conflict) << to_string(kind);
    EXPECT_LE(m.ego_conflict, m.ego_zone_exit) << to_string(kind);
    EXPECT_LT(m.ego_zone_exit, m.ego_route_length) << to_string(kind);
    EXPECT_NEAR(route_length(m.graph, m.ego_route), m.ego_route_length, 1e-9);
    if (kind == VistaKind::crossing_light) {
      EXPECT_TRUE(m.arriving_route.empty());
    } else {
      EXPECT_FALSE(m.arriving_route.empty());
      EXPECT_NEAR(route_length(m.graph, m.arriving_route), m.arr_route_length, 1e-9);
      EXPECT_LT(m.arr_conflict, m.arr_route_length);
    }
    if (kind == VistaKind::lane_change) {
      EXPECT_FALSE(m.inner_route.empty());
      EXPECT_NEAR(route_length(m.graph, m.inner_route), m.inner_route_length, 1e-9);
    }
  }
}

TEST(ContextMap, LaneChangeCrossoverLength) {
  ContextMap m = build_context_map(VistaKind::lane_change);
  EXPECT_NEAR(m.ego_zone_entry, m.params.approach + m.params.lane_change_path, 1e-9);
}

}  // namespace
}  // namespace vistatest
