#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vega/errors.hpp"
#include "vega/road_graph.hpp"

using namespace vega;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

RoadGraph line_graph() {
  // a -> b -> c, plus an isolated node d
  std::vector<Node> nodes = {{0, {0.0, 0.0}, false},
                             {1, {0.0, 0.5}, true},
                             {2, {0.0, 1.0}, false},
                             {3, {1.0, 1.0}, false}};
  std::vector<Edge> edges = {{0, 1, 60.0, 100.0}, {1, 2, 60.0, 100.0}};
  return RoadGraph(std::move(nodes), std::move(edges));
}

}  // namespace

TEST_SUITE("road_graph") {

TEST_CASE("haversine identity and reference points") {
  const GeoPoint x{12.34, -56.78};
  CHECK(haversine_km(x, x) == 0.0);
  CHECK(haversine_km({0, 0}, {0, 1}) == doctest::Approx(111.195).epsilon(1e-4));
  const GeoPoint sf{37.7750, -122.4194};
  const GeoPoint ny{40.7128, -74.0060};
  const double d = haversine_km(sf, ny);
  CHECK(std::abs(d - 4130.0) < 10.0);
  CHECK(d == doctest::Approx(vega_test::law_of_cosines_km(sf, ny)).epsilon(1e-6));
}

TEST_CASE("haversine symmetry and triangle inequality") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint a{vega_test::uniform01(rng) * 160.0 - 80.0,
                     vega_test::uniform01(rng) * 360.0 - 180.0};
    const GeoPoint b{vega_test::uniform01(rng) * 160.0 - 80.0,
                     vega_test::uniform01(rng) * 360.0 - 180.0};
    const GeoPoint c{vega_test::uniform01(rng) * 160.0 - 80.0,
                     vega_test::uniform01(rng) * 360.0 - 180.0};
    const double ab = haversine_km(a, b);
    const double ba = haversine_km(b, a);
    const double bc = haversine_km(b, c);
    const double ac = haversine_km(a, c);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ac <= ab + bc + 1e-6 * (ab + bc + 1.0));
  }
}

TEST_CASE("haversine rejects bad coordinates") {
  CHECK_THROWS_AS(validate(GeoPoint{91.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(validate(GeoPoint{0.0, 181.0}), InvalidArgument);
}

TEST_CASE("neighbors ordering and errors") {
  const RoadGraph g = line_graph();
  CHECK(g.neighbors(3).empty());                // isolated node
  REQUIRE(g.neighbors(1).size() == 1);
  CHECK(g.neighbors(1)[0].to == 2);
  CHECK_THROWS_AS(g.neighbors(17), UnknownNode);

  const RoadGraph grid = gen_grid(3, 3, 10.0, 3, 80.0, 5);
  const auto& mid = grid.neighbors(4);  // interior node of a 3x3 lattice
  REQUIRE(mid.size() == 4);
  for (std::size_t k = 1; k < mid.size(); ++k) CHECK(mid[k - 1].to < mid[k].to);
}

TEST_CASE("load: schema and invariant failures") {
  const std::string path = temp_path("vega_bad_graph.json");
  {
    std::ofstream f(path);
    f << R"({"nodes": [], "edges": []})";
  }
  CHECK_THROWS_AS(RoadGraph::load(path), InvariantViolation);
  {
    std::ofstream f(path);
    f << R"({"nodes": [{"id":0,"lat":0,"lon":0,"charger":false}],
             "edges": [{"from":0,"to":7,"length_km":1,"speed_kmh":50}]})";
  }
  CHECK_THROWS_WITH_AS(RoadGraph::load(path), doctest::Contains("edges[0]"),
                       InvariantViolation);
  {
    std::ofstream f(path);
    f << R"({"nodes": [{"id":0,"lat":0,"lon":0,"charger":false},
                       {"id":1,"lat":0,"lon":1,"charger":false}],
             "edges": [{"from":0,"to":1,"length_km":-3,"speed_kmh":50}]})";
  }
  CHECK_THROWS_AS(RoadGraph::load(path), InvariantViolation);
  {
    std::ofstream f(path);
    f << R"({"nodes": [{"id":0,"lat":NaN,"lon":0,"charger":false}], "edges": []})";
  }
  CHECK_THROWS_AS(RoadGraph::load(path), ParseError);
  {
    std::ofstream f(path);
    f << R"({"nodes": [{"id":0,"lat":0,"charger":false}], "edges": []})";
  }
  CHECK_THROWS_WITH_AS(RoadGraph::load(path), doctest::Contains("nodes[0]"), ParseError);
  fs::remove(path);
}

TEST_CASE("load: two-node fixture") {
  const std::string path = temp_path("vega_two_node.json");
  {
    std::ofstream f(path);
    f << R"({"nodes": [{"id":10,"lat":0,"lon":0,"charger":true},
                       {"id":20,"lat":0,"lon":1,"charger":false}],
             "edges": [{"from":10,"to":20,"length_km":112.0,"speed_kmh":90}]})";
  }
  const RoadGraph g = RoadGraph::load(path);
  CHECK(g.size() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.external_id(0) == 10);
  CHECK(g.external_id(1) == 20);
  CHECK(g.node(0).is_charger);
  REQUIRE(g.neighbors(0).size() == 1);
  CHECK(g.neighbors(0)[0].length_km == 112.0);
  fs::remove(path);
}

TEST_CASE("save/load round trip on random graphs") {
  const std::string path = temp_path("vega_roundtrip.json");
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const RoadGraph g = vega_test::random_geo_graph(seed, {});
    g.save(path);
    const RoadGraph h = RoadGraph::load(path);
    CHECK(g.to_json() == h.to_json());
  }
  fs::remove(path);
}

TEST_CASE("gen_corridor contracts") {
  const RoadGraph tiny = gen_corridor(2, 100.0, 1, 100.0, 3);
  CHECK(tiny.size() == 2);
  CHECK(tiny.edge_count() == 2);
  CHECK(tiny.node(0).is_charger);
  CHECK(tiny.node(1).is_charger);

  const RoadGraph longhaul = gen_corridor(25, 230.0, 1, 100.0, 3);
  double per_direction = 0.0;
  for (int i = 0; i < longhaul.size(); ++i) {
    for (const Edge& e : longhaul.neighbors(i)) {
      if (e.to > i) per_direction += e.length_km;
    }
  }
  CHECK(per_direction == doctest::Approx(5520.0));
  // Edge lengths dominate the straight-line distance between endpoints.
  for (int i = 0; i + 1 < longhaul.size(); ++i) {
    const double d = haversine_km(longhaul.node(i).pos, longhaul.node(i + 1).pos);
    CHECK(d <= 230.0);
    CHECK(d == doctest::Approx(230.0).epsilon(1e-3));
  }

  const RoadGraph strided = gen_corridor(10, 50.0, 3, 80.0, 3);
  for (int i = 0; i < 10; ++i) CHECK(strided.node(i).is_charger == (i % 3 == 0));

  CHECK_THROWS_AS(gen_corridor(1, 50.0, 1, 80.0, 0), InvalidArgument);
  CHECK_THROWS_AS(gen_corridor(5, -1.0, 1, 80.0, 0), InvalidArgument);
}

TEST_CASE("generators are pure functions of their arguments") {
  const RoadGraph a = gen_corridor(12, 75.0, 2, 90.0, 77);
  const RoadGraph b = gen_corridor(12, 75.0, 2, 90.0, 77);
  CHECK(a.to_json() == b.to_json());
  const RoadGraph c = gen_corridor(12, 75.0, 2, 90.0, 78);
  CHECK(a.to_json() != c.to_json());

  const RoadGraph ga = gen_grid(4, 5, 20.0, 4, 70.0, 9);
  const RoadGraph gb = gen_grid(4, 5, 20.0, 4, 70.0, 9);
  CHECK(ga.to_json() == gb.to_json());
  CHECK(ga.size() == 20);
}

TEST_CASE("grid edge lengths dominate haversine everywhere") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const RoadGraph g = gen_grid(4, 6, 35.0, 5, 90.0, seed);
    for (int i = 0; i < g.size(); ++i) {
      for (const Edge& e : g.neighbors(i)) {
        CHECK(haversine_km(g.node(e.from).pos, g.node(e.to).pos) <= e.length_km);
      }
    }
  }
}

TEST_CASE("charger distance and nearest node") {
  const RoadGraph g = line_graph();
  CHECK(g.charger_distance_km(1) == 0.0);
  CHECK(g.charger_distance_km(0) ==
        doctest::Approx(haversine_km(g.node(0).pos, g.node(1).pos)));
  CHECK(g.nearest_node({0.0, 0.51}) == 1);
}

}  // TEST_SUITE
