#include "vega/route_plan.hpp"

#include <algorithm>
#include <cmath>

#include "vega/errors.hpp"

namespace vega {

namespace {

const Edge* find_edge(const RoadGraph& g, int from, int to) {
  for (const Edge& e : g.neighbors(from)) {
    if (e.to == to) return &e;
  }
  return nullptr;
}

nlohmann::json segment_to_json(const PlanSegment& s) {
  nlohmann::json poly = nlohmann::json::array();
  for (const GeoPoint& p : s.polyline) poly.push_back({p.lon, p.lat});
  return nlohmann::json{{"start", {{"lat", s.start.lat}, {"lon", s.start.lon}}},
                        {"distance_km", s.distance_km},
                        {"driving_time_h", s.driving_time_h},
                        {"energy_kwh", s.energy_kwh},
                        {"end_soc_pct", s.end_soc_pct},
                        {"charging_time_h", s.charging_time_h},
                        {"node_path", s.node_path},
                        {"polyline", poly}};
}

}  // namespace

PlanTotals compute_totals(const std::vector<PlanSegment>& segments) {
  PlanTotals t;
  double dwell_min = 0.0;
  for (const PlanSegment& s : segments) {
    t.distance_km += s.distance_km;
    t.driving_time_h += s.driving_time_h;
    t.charging_time_h += s.charging_time_h;
    t.energy_kwh += s.energy_kwh;
    if (s.charging_time_h > 0.0) {
      t.stops += 1;
      dwell_min += s.charging_time_h * 60.0;
    }
  }
  t.avg_dwell_min = t.stops > 0 ? dwell_min / t.stops : 0.0;
  t.avg_hop_km = segments.empty() ? 0.0 : t.distance_km / static_cast<double>(segments.size());
  t.energy_intensity_wh_per_km =
      t.distance_km > 0.0 ? 1000.0 * t.energy_kwh / t.distance_km : 0.0;
  return t;
}

RoutePlan zero_length_plan(const RoadGraph& g, int node, double soc0_pct) {
  PlanSegment s;
  s.start = g.node(node).pos;
  s.end_soc_pct = soc0_pct;
  s.node_path = {node};
  s.polyline = {g.node(node).pos};
  RoutePlan plan;
  plan.segments.push_back(s);
  plan.totals = compute_totals(plan.segments);
  return plan;
}

RoutePlan build_plan_from_path(const RoadGraph& g, const VehicleParams& params,
                               const ChargeCurve& curve, const std::vector<int>& path,
                               double soc0_pct, double charge_cap_pct) {
  if (path.size() < 2) {
    throw InvalidArgument("build_plan_from_path: need at least two nodes");
  }
  RoutePlan plan;
  double soc = soc0_pct;
  PlanSegment seg;
  seg.start = g.node(path.front()).pos;
  seg.node_path = {path.front()};
  seg.polyline = {g.node(path.front()).pos};

  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Edge* e = find_edge(g, path[i], path[i + 1]);
    if (!e) {
      throw InvalidArgument("path nodes " + std::to_string(path[i]) + " -> " +
                            std::to_string(path[i + 1]) + " are not adjacent");
    }
    const SegmentCost sc = segment_cost(*e, params);
    soc -= sc.soc_drop_pct;
    if (soc < 0.0) {
      throw NoFeasiblePath("path depletes the battery at node " +
                           std::to_string(path[i + 1]));
    }
    seg.distance_km += e->length_km;
    seg.driving_time_h += sc.time_h;
    seg.energy_kwh += sc.energy_kwh;
    seg.node_path.push_back(e->to);
    seg.polyline.push_back(g.node(e->to).pos);

    const bool at_goal = i + 2 == path.size();
    const bool charge_here = !at_goal && g.node(e->to).is_charger && soc < charge_cap_pct;
    if (charge_here || at_goal) {
      seg.end_soc_pct = soc;
      seg.charging_time_h =
          charge_here ? charge_time_min(curve, soc, charge_cap_pct) / 60.0 : 0.0;
      if (charge_here) soc = charge_cap_pct;
      plan.segments.push_back(seg);
      seg = PlanSegment{};
      seg.start = g.node(e->to).pos;
      seg.node_path = {e->to};
      seg.polyline = {g.node(e->to).pos};
    }
  }
  plan.totals = compute_totals(plan.segments);
  return plan;
}

nlohmann::json to_json(const RoutePlan& plan) {
  nlohmann::json segs = nlohmann::json::array();
  for (const PlanSegment& s : plan.segments) segs.push_back(segment_to_json(s));
  const PlanTotals& t = plan.totals;
  return nlohmann::json{
      {"segments", segs},
      {"totals",
       {{"distance_km", t.distance_km},
        {"driving_time_h", t.driving_time_h},
        {"charging_time_h", t.charging_time_h},
        {"energy_kwh", t.energy_kwh},
        {"stops", t.stops},
        {"avg_dwell_min", t.avg_dwell_min},
        {"avg_hop_km", t.avg_hop_km},
        {"energy_intensity_wh_per_km", t.energy_intensity_wh_per_km}}}};
}

RoutePlan route_plan_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("segments")) {
    throw ParseError("plan JSON must carry a 'segments' array");
  }
  RoutePlan plan;
  for (const auto& js : j.at("segments")) {
    PlanSegment s;
    s.start = {js.at("start").at("lat").get<double>(), js.at("start").at("lon").get<double>()};
    s.distance_km = js.at("distance_km").get<double>();
    s.driving_time_h = js.at("driving_time_h").get<double>();
    s.energy_kwh = js.at("energy_kwh").get<double>();
    s.end_soc_pct = js.at("end_soc_pct").get<double>();
    s.charging_time_h = js.at("charging_time_h").get<double>();
    if (js.contains("node_path")) s.node_path = js.at("node_path").get<std::vector<int>>();
    if (js.contains("polyline")) {
      for (const auto& pt : js.at("polyline")) {
        s.polyline.push_back({pt.at(1).get<double>(), pt.at(0).get<double>()});
      }
    }
    plan.segments.push_back(std::move(s));
  }
  plan.totals = compute_totals(plan.segments);
  return plan;
}

bool replay_feasible(const RoadGraph& g, const VehicleParams& params,
                     const ChargeCurve& curve, const RoutePlan& plan,
                     double soc0_pct, double charge_cap_pct) {
  BatteryState b{soc0_pct};
  for (const PlanSegment& s : plan.segments) {
    if (s.node_path.size() < 2) continue;
    for (std::size_t i = 0; i + 1 < s.node_path.size(); ++i) {
      const Edge* e = find_edge(g, s.node_path[i], s.node_path[i + 1]);
      if (!e) return false;
      try {
        b = discharge(b, segment_cost(*e, params));
      } catch (const DepletedError&) {
        return false;
      }
    }
    if (std::abs(b.soc_pct - s.end_soc_pct) > 1e-6) return false;
    if (s.charging_time_h > 0.0) {
      b.soc_pct = std::min(charge_cap_pct,
                           soc_after_charging(curve, b.soc_pct, s.charging_time_h * 60.0));
    }
  }
  return true;
}

nlohmann::json plan_to_geojson(const RoutePlan& plan) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const PlanSegment& s = plan.segments[i];
    if (s.polyline.size() >= 2) {
      nlohmann::json coords = nlohmann::json::array();
      for (const GeoPoint& p : s.polyline) coords.push_back({p.lon, p.lat});
      features.push_back(
          {{"type", "Feature"},
           {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
           {"properties",
            {{"segment", i},
             {"distance_km", s.distance_km},
             {"driving_time_h", s.driving_time_h},
             {"energy_kwh", s.energy_kwh}}}});
    } else if (!s.polyline.empty()) {
      features.push_back(
          {{"type", "Feature"},
           {"geometry",
            {{"type", "Point"}, {"coordinates", {s.polyline[0].lon, s.polyline[0].lat}}}},
           {"properties", {{"segment", i}, {"end_soc_pct", s.end_soc_pct}}}});
    }
    if (s.charging_time_h > 0.0 && !s.polyline.empty()) {
      const GeoPoint& stop = s.polyline.back();
      features.push_back(
          {{"type", "Feature"},
           {"geometry", {{"type", "Point"}, {"coordinates", {stop.lon, stop.lat}}}},
           {"properties",
            {{"stop_after_segment", i},
             {"dwell_min", s.charging_time_h * 60.0},
             {"end_soc_pct", s.end_soc_pct}}}});
    }
  }
  return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace vega
