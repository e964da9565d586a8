#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vega/geo.hpp"

namespace vega {

struct Node {
  int id = 0;  // dense index within the graph
  GeoPoint pos;
  bool is_charger = false;
};

struct Edge {
  int from = 0;
  int to = 0;
  double length_km = 0.0;
  double speed_limit_kmh = 0.0;

  bool operator==(const Edge&) const = default;
};

// Immutable directed road graph with charger-flagged nodes.
//
// Node ids are dense 0..n-1, assigned at construction in ascending order of
// the external ids found in the input; external ids are kept in an aux map.
// Adjacency lists are sorted by destination id, which fixes the action-slot
// assignment used by the environment. Instances are safe for concurrent
// reads once constructed.
class RoadGraph {
 public:
  // `nodes` carry external ids (unique, any nonnegative integers);
  // `edges` reference those external ids. Validates all invariants.
  RoadGraph(std::vector<Node> nodes, std::vector<Edge> edges);

  static RoadGraph from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static RoadGraph load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  std::size_t edge_count() const { return edge_count_; }
  bool has_node(int id) const { return id >= 0 && id < size(); }

  const Node& node(int id) const;
  std::int64_t external_id(int id) const;

  // Outgoing edges, sorted by destination id. Throws UnknownNode.
  const std::vector<Edge>& neighbors(int id) const;

  // Haversine distance from `id` to the closest charger node (0 at a
  // charger). Infinity when the graph has no chargers.
  double charger_distance_km(int id) const;

  // Index of the nearest node to `p` by haversine distance (lowest id wins
  // ties). The graph always has at least one node.
  int nearest_node(const GeoPoint& p) const;

  double mean_edge_length_km() const { return mean_edge_length_km_; }
  double max_speed_kmh() const { return max_speed_kmh_; }
  bool has_chargers() const { return has_chargers_; }

  struct BBox {
    double lat_min, lat_max, lon_min, lon_max;
  };
  const BBox& bbox() const { return bbox_; }

 private:
  std::vector<Node> nodes_;
  std::vector<std::int64_t> external_ids_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<double> charger_dist_km_;
  std::size_t edge_count_ = 0;
  double mean_edge_length_km_ = 0.0;
  double max_speed_kmh_ = 0.0;
  bool has_chargers_ = false;
  BBox bbox_{};
};

// Bidirectional chain of `n_nodes` spaced `hop_km` apart along a meridian;
// every `charger_every`-th node (by index) is flagged as a charger. The seed
// picks the corridor origin; inter-node distances do not depend on it.
RoadGraph gen_corridor(int n_nodes, double hop_km, int charger_every,
                       double speed_kmh, std::uint64_t seed);

// rows x cols lattice with 4-neighbor bidirectional edges of length `hop_km`.
RoadGraph gen_grid(int rows, int cols, double hop_km, int charger_every,
                   double speed_kmh, std::uint64_t seed);

}  // namespace vega
