#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "vega/charging.hpp"
#include "vega/energy.hpp"
#include "vega/road_graph.hpp"

namespace vega {

// One driving stretch between charging stops (or to the goal). `end_soc_pct`
// is the SoC on arrival at the segment end, before any charging there;
// `charging_time_h` is the dwell at the stop closing the segment (zero for
// the final segment).
struct PlanSegment {
  GeoPoint start;
  double distance_km = 0.0;
  double driving_time_h = 0.0;
  double energy_kwh = 0.0;
  double end_soc_pct = 0.0;
  double charging_time_h = 0.0;
  std::vector<int> node_path;          // node ids, segment start..end inclusive
  std::vector<GeoPoint> polyline;      // positions of node_path
};

struct PlanTotals {
  double distance_km = 0.0;
  double driving_time_h = 0.0;
  double charging_time_h = 0.0;
  double energy_kwh = 0.0;
  int stops = 0;
  double avg_dwell_min = 0.0;
  double avg_hop_km = 0.0;
  double energy_intensity_wh_per_km = 0.0;
};

struct RoutePlan {
  std::vector<PlanSegment> segments;
  PlanTotals totals;
};

// Recomputes totals from the segment rows.
PlanTotals compute_totals(const std::vector<PlanSegment>& segments);

// Builds the plan for a node path, charging to `charge_cap_pct` on arrival
// at every charger node passed en route (never at the goal); each such stop
// closes a segment. SoC is replayed continuously; throws NoFeasiblePath if
// the replay would deplete the battery.
RoutePlan build_plan_from_path(const RoadGraph& g, const VehicleParams& params,
                               const ChargeCurve& curve, const std::vector<int>& path,
                               double soc0_pct, double charge_cap_pct);

// Plan consisting of a single zero-length segment at `node`.
RoutePlan zero_length_plan(const RoadGraph& g, int node, double soc0_pct);

nlohmann::json to_json(const RoutePlan& plan);
RoutePlan route_plan_from_json(const nlohmann::json& j);

// Replays the plan through the energy model: returns false if any segment's
// SoC bookkeeping is inconsistent or the battery would deplete.
bool replay_feasible(const RoadGraph& g, const VehicleParams& params,
                     const ChargeCurve& curve, const RoutePlan& plan,
                     double soc0_pct, double charge_cap_pct);

// FeatureCollection with one LineString per driving segment and one Point
// per charging stop (dwell minutes and end-SoC as properties). Zero-length
// segments emit a Point instead of a LineString.
nlohmann::json plan_to_geojson(const RoutePlan& plan);

}  // namespace vega
