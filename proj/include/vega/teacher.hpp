#pragma once

#include <cstdint>
#include <vector>

#include "vega/charging.hpp"
#include "vega/energy.hpp"
#include "vega/road_graph.hpp"

namespace vega {

// Weights and limits of the teacher search. The edge cost is
//   c = w_t * T_minutes + (w_e + w_c * tariff_p) * E_kwh,
// with a nonnegative charging dwell added to the time term when the search
// charges on arrival at a charger node. Defaults give a pure-time objective.
struct TeacherConfig {
  double w_t = 1.0;           // per minute
  double w_e = 0.0;           // per kWh
  double w_c = 0.0;
  double tariff_p = 0.0;      // currency per kWh
  double tariff_p_min = 0.0;  // lower bound used by the heuristic
  double v_max_kmh = 130.0;   // must dominate every speed limit in the graph
  std::int64_t n_exp = 1'000'000;  // expansion budget
  int replan_period_tau = 1;  // steps between replans during rollouts
  double soc_bucket_pct = 1.0;
  double charge_cap_pct = 80.0;  // arrival charging target at charger nodes

  void validate() const;
};

struct TeacherPlan {
  std::vector<int> path;  // node ids; empty when start == goal
  double cost = 0.0;
  bool feasible = false;
  std::int64_t expansions_used = 0;
};

// Admissible and consistent lower bound on the remaining cost:
//   w_t * 60*d(i,g)/v_max + (w_e + w_c*p_min) * E(d(i,g) at v_max).
double heuristic(const RoadGraph& g, int node, int goal, const TeacherConfig& cfg,
                 const VehicleParams& params);

// A* over (node, SoC bucket) states. SoC is rounded down to the bucket
// resolution after every transition; edges whose SoC drop exceeds the
// remaining charge are pruned; arriving at a charger node (other than the
// goal) charges to the cap and adds the dwell to the time term. Returns the
// optimal path within the expansion budget, or a best-effort prefix toward
// the node closest to the goal (feasible = false) when the budget runs out
// or no path exists.
TeacherPlan plan(const RoadGraph& g, const TeacherConfig& cfg,
                 const VehicleParams& params, const ChargeCurve& curve,
                 int start, int goal, double soc0_pct);

// Action slots (indices into neighbors(current)) whose destination lies on
// the plan's path. Empty when the plan is empty or infeasible.
std::vector<int> shortlist(const TeacherPlan& plan, int current, const RoadGraph& g);

// Slot of the neighbor closest to the goal by haversine distance; ties break
// toward the smallest node id. Throws NoNeighbors.
int greedy_hint(const RoadGraph& g, int current, int goal);

// Unbudgeted label-correcting search over the same (node x SoC bucket)
// transition model; provably optimal at the chosen discretization. Intended
// for small graphs (test scale, |V| <= ~50).
TeacherPlan oracle_optimal(const RoadGraph& g, const TeacherConfig& cfg,
                           const VehicleParams& params, const ChargeCurve& curve,
                           int start, int goal, double soc0_pct,
                           double soc_bucket_pct);

}  // namespace vega
