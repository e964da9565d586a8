#include "vega/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include "vega/errors.hpp"

namespace vega {

namespace {

// Kilometres per degree of latitude used by the synthetic generators.
// Slightly above the true value so generated edge lengths always dominate
// the haversine distance between their endpoints.
constexpr double kGenKmPerDeg = 111.2;

double finite_or_throw(const nlohmann::json& j, const char* where) {
  if (!j.is_number()) {
    throw ParseError(std::string(where) + ": expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw ParseError(std::string(where) + ": non-finite value");
  }
  return v;
}

}  // namespace

RoadGraph::RoadGraph(std::vector<Node> nodes, std::vector<Edge> edges) {
  if (nodes.empty()) {
    throw InvariantViolation("graph must contain at least one node");
  }

  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  std::map<std::int64_t, int> dense;  // external id -> dense index
  nodes_.reserve(nodes.size());
  external_ids_.reserve(nodes.size());
  for (const Node& n : nodes) {
    validate(n.pos);
    if (n.id < 0) {
      throw InvariantViolation("node id must be nonnegative: " + std::to_string(n.id));
    }
    if (!dense.emplace(n.id, static_cast<int>(nodes_.size())).second) {
      throw InvariantViolation("duplicate node id " + std::to_string(n.id));
    }
    external_ids_.push_back(n.id);
    Node stored = n;
    stored.id = static_cast<int>(nodes_.size());
    nodes_.push_back(stored);
  }

  adjacency_.assign(nodes_.size(), {});
  double total_length = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    const auto from_it = dense.find(e.from);
    const auto to_it = dense.find(e.to);
    if (from_it == dense.end() || to_it == dense.end()) {
      throw InvariantViolation("edges[" + std::to_string(i) + "] (" +
                               std::to_string(e.from) + " -> " + std::to_string(e.to) +
                               ") references a node not in the graph");
    }
    if (e.from == e.to) {
      throw InvariantViolation("edges[" + std::to_string(i) + "]: self-loop at node " +
                               std::to_string(e.from));
    }
    if (!(e.length_km > 0.0) || !std::isfinite(e.length_km)) {
      throw InvariantViolation("edges[" + std::to_string(i) +
                               "]: length_km must be positive");
    }
    if (!(e.speed_limit_kmh > 0.0) || !std::isfinite(e.speed_limit_kmh)) {
      throw InvariantViolation("edges[" + std::to_string(i) +
                               "]: speed_kmh must be positive");
    }
    Edge stored = e;
    stored.from = from_it->second;
    stored.to = to_it->second;
    adjacency_[stored.from].push_back(stored);
    total_length += stored.length_km;
    max_speed_kmh_ = std::max(max_speed_kmh_, stored.speed_limit_kmh);
    ++edge_count_;
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(),
              [](const Edge& a, const Edge& b) { return a.to < b.to; });
  }
  mean_edge_length_km_ = edge_count_ > 0 ? total_length / static_cast<double>(edge_count_) : 0.0;

  bbox_ = {90.0, -90.0, 180.0, -180.0};
  for (const Node& n : nodes_) {
    bbox_.lat_min = std::min(bbox_.lat_min, n.pos.lat);
    bbox_.lat_max = std::max(bbox_.lat_max, n.pos.lat);
    bbox_.lon_min = std::min(bbox_.lon_min, n.pos.lon);
    bbox_.lon_max = std::max(bbox_.lon_max, n.pos.lon);
  }

  charger_dist_km_.assign(nodes_.size(), std::numeric_limits<double>::infinity());
  std::vector<int> chargers;
  for (const Node& n : nodes_) {
    if (n.is_charger) chargers.push_back(n.id);
  }
  has_chargers_ = !chargers.empty();
  if (has_chargers_) {
    for (const Node& n : nodes_) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : chargers) {
        best = std::min(best, haversine_km(n.pos, nodes_[c].pos));
      }
      charger_dist_km_[n.id] = best;
    }
  }
}

const Node& RoadGraph::node(int id) const {
  if (!has_node(id)) {
    throw UnknownNode("unknown node id " + std::to_string(id));
  }
  return nodes_[id];
}

std::int64_t RoadGraph::external_id(int id) const {
  if (!has_node(id)) {
    throw UnknownNode("unknown node id " + std::to_string(id));
  }
  return external_ids_[id];
}

const std::vector<Edge>& RoadGraph::neighbors(int id) const {
  if (!has_node(id)) {
    throw UnknownNode("unknown node id " + std::to_string(id));
  }
  return adjacency_[id];
}

double RoadGraph::charger_distance_km(int id) const {
  if (!has_node(id)) {
    throw UnknownNode("unknown node id " + std::to_string(id));
  }
  return charger_dist_km_[id];
}

int RoadGraph::nearest_node(const GeoPoint& p) const {
  validate(p);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    const double d = haversine_km(p, n.pos);
    if (d < best_d) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

RoadGraph RoadGraph::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges")) {
    throw ParseError("graph JSON must be an object with 'nodes' and 'edges'");
  }
  const auto& jn = j.at("nodes");
  const auto& je = j.at("edges");
  if (!jn.is_array() || !je.is_array()) {
    throw ParseError("'nodes' and 'edges' must be arrays");
  }
  std::vector<Node> nodes;
  nodes.reserve(jn.size());
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const auto& n = jn[i];
    const std::string where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object() || !n.contains("id") || !n.contains("lat") ||
        !n.contains("lon") || !n.contains("charger")) {
      throw ParseError(where + ": expected fields id, lat, lon, charger");
    }
    if (!n.at("id").is_number_integer()) {
      throw ParseError(where + ".id: expected an integer");
    }
    if (!n.at("charger").is_boolean()) {
      throw ParseError(where + ".charger: expected a boolean");
    }
    Node node;
    node.id = n.at("id").get<int>();
    node.pos.lat = finite_or_throw(n.at("lat"), (where + ".lat").c_str());
    node.pos.lon = finite_or_throw(n.at("lon"), (where + ".lon").c_str());
    node.is_charger = n.at("charger").get<bool>();
    nodes.push_back(node);
  }
  std::vector<Edge> edges;
  edges.reserve(je.size());
  for (std::size_t i = 0; i < je.size(); ++i) {
    const auto& e = je[i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("from") || !e.contains("to") ||
        !e.contains("length_km") || !e.contains("speed_kmh")) {
      throw ParseError(where + ": expected fields from, to, length_km, speed_kmh");
    }
    if (!e.at("from").is_number_integer() || !e.at("to").is_number_integer()) {
      throw ParseError(where + ": from/to must be integers");
    }
    Edge edge;
    edge.from = e.at("from").get<int>();
    edge.to = e.at("to").get<int>();
    edge.length_km = finite_or_throw(e.at("length_km"), (where + ".length_km").c_str());
    edge.speed_limit_kmh = finite_or_throw(e.at("speed_kmh"), (where + ".speed_kmh").c_str());
    edges.push_back(edge);
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

nlohmann::json RoadGraph::to_json() const {
  nlohmann::json jn = nlohmann::json::array();
  for (const Node& n : nodes_) {
    jn.push_back({{"id", external_ids_[n.id]},
                  {"lat", n.pos.lat},
                  {"lon", n.pos.lon},
                  {"charger", n.is_charger}});
  }
  // Canonical form: edges sorted by (from, to) in external-id order. Dense
  // ids are assigned in ascending external-id order, so dense order works.
  nlohmann::json je = nlohmann::json::array();
  for (const Node& n : nodes_) {
    for (const Edge& e : adjacency_[n.id]) {
      je.push_back({{"from", external_ids_[e.from]},
                    {"to", external_ids_[e.to]},
                    {"length_km", e.length_km},
                    {"speed_kmh", e.speed_limit_kmh}});
    }
  }
  return nlohmann::json{{"nodes", jn}, {"edges", je}};
}

RoadGraph RoadGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open graph file: " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

void RoadGraph::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot open file for writing: " + path);
  }
  out << to_json().dump(2) << '\n';
}

RoadGraph gen_corridor(int n_nodes, double hop_km, int charger_every,
                       double speed_kmh, std::uint64_t seed) {
  if (n_nodes < 2) throw InvalidArgument("gen_corridor: n_nodes must be >= 2");
  if (!(hop_km > 0.0)) throw InvalidArgument("gen_corridor: hop_km must be positive");
  if (charger_every < 1) throw InvalidArgument("gen_corridor: charger_every must be >= 1");
  if (!(speed_kmh > 0.0)) throw InvalidArgument("gen_corridor: speed_kmh must be positive");

  const double span_deg = (n_nodes - 1) * hop_km / kGenKmPerDeg;
  if (span_deg > 128.0) {
    throw InvalidArgument("gen_corridor: corridor too long to fit on the sphere");
  }
  std::mt19937_64 rng(seed);
  const double lat_hi = std::min(20.0, 88.0 - span_deg);
  const double lat0 = -40.0 + (lat_hi + 40.0) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  const double lon0 = -120.0 + 180.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  nodes.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    Node n;
    n.id = i;
    n.pos = {lat0 + i * hop_km / kGenKmPerDeg, lon0};
    n.is_charger = (i % charger_every) == 0;
    nodes.push_back(n);
    if (i + 1 < n_nodes) {
      edges.push_back({i, i + 1, hop_km, speed_kmh});
      edges.push_back({i + 1, i, hop_km, speed_kmh});
    }
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

RoadGraph gen_grid(int rows, int cols, double hop_km, int charger_every,
                   double speed_kmh, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rows * cols < 2) {
    throw InvalidArgument("gen_grid: need at least two nodes");
  }
  if (!(hop_km > 0.0)) throw InvalidArgument("gen_grid: hop_km must be positive");
  if (charger_every < 1) throw InvalidArgument("gen_grid: charger_every must be >= 1");
  if (!(speed_kmh > 0.0)) throw InvalidArgument("gen_grid: speed_kmh must be positive");

  const double lat_span = (rows - 1) * hop_km / kGenKmPerDeg;
  if (lat_span > 60.0) throw InvalidArgument("gen_grid: grid too tall");
  std::mt19937_64 rng(seed);
  const double lat0 = -20.0 + 20.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  const double lon0 = -60.0 + 60.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);

  // Longitude spacing sized at the row closest to the equator so east-west
  // edge lengths dominate the haversine distance on every row.
  double min_abs_lat = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rows; ++r) {
    min_abs_lat = std::min(min_abs_lat, std::abs(lat0 + r * hop_km / kGenKmPerDeg));
  }
  const double dlon =
      hop_km / (kGenKmPerDeg * std::cos(min_abs_lat * 3.14159265358979323846 / 180.0));
  if ((cols - 1) * dlon > 120.0) throw InvalidArgument("gen_grid: grid too wide");

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  nodes.reserve(static_cast<std::size_t>(rows) * cols);
  auto idx = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Node n;
      n.id = idx(r, c);
      n.pos = {lat0 + r * hop_km / kGenKmPerDeg, lon0 + c * dlon};
      n.is_charger = (n.id % charger_every) == 0;
      nodes.push_back(n);
      if (c + 1 < cols) {
        edges.push_back({idx(r, c), idx(r, c + 1), hop_km, speed_kmh});
        edges.push_back({idx(r, c + 1), idx(r, c), hop_km, speed_kmh});
      }
      if (r + 1 < rows) {
        edges.push_back({idx(r, c), idx(r + 1, c), hop_km, speed_kmh});
        edges.push_back({idx(r + 1, c), idx(r, c), hop_km, speed_kmh});
      }
    }
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

}  // namespace vega
