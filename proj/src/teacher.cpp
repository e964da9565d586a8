#include "vega/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>

#include "vega/errors.hpp"

namespace vega {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StateKey {
  int node;
  int bucket;
  bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    return std::hash<std::int64_t>()(static_cast<std::int64_t>(k.node) * 131071 + k.bucket);
  }
};

int bucket_of(double soc_pct, double bucket_pct) {
  return static_cast<int>(std::floor(soc_pct / bucket_pct + 1e-9));
}

// Deterministic transition shared by plan() and oracle_optimal(): traverse
// `edge` from a state whose SoC is `bucket * bucket_pct`, then charge to the
// cap if the destination is a charger other than the goal.
struct Transition {
  double cost;
  int bucket;
};

std::optional<Transition> relax(const RoadGraph& g, const TeacherConfig& cfg,
                                const VehicleParams& params, const ChargeCurve& curve,
                                int goal, int bucket, const Edge& edge) {
  const double soc = bucket * cfg.soc_bucket_pct;
  const SegmentCost sc = segment_cost(edge, params);
  if (soc - sc.soc_drop_pct < 0.0) return std::nullopt;
  double soc2 = soc - sc.soc_drop_pct;
  double cost = cfg.w_t * (sc.time_h * 60.0) +
                (cfg.w_e + cfg.w_c * cfg.tariff_p) * sc.energy_kwh;
  if (edge.to != goal && g.node(edge.to).is_charger && soc2 < cfg.charge_cap_pct) {
    cost += cfg.w_t * charge_time_min(curve, soc2, cfg.charge_cap_pct);
    soc2 = cfg.charge_cap_pct;
  }
  return Transition{cost, bucket_of(soc2, cfg.soc_bucket_pct)};
}

struct Label {
  double cost = kInf;
  StateKey parent{-1, -1};
  bool settled = false;
};

std::vector<int> rebuild_path(
    const std::unordered_map<StateKey, Label, StateKeyHash>& labels, StateKey at) {
  std::vector<int> path;
  while (at.node >= 0) {
    path.push_back(at.node);
    const auto it = labels.find(at);
    if (it == labels.end()) break;
    at = it->second.parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void check_plan_args(const RoadGraph& g, const TeacherConfig& cfg, int start, int goal,
                     double soc0_pct) {
  cfg.validate();
  if (!g.has_node(start)) throw UnknownNode("plan: unknown start node " + std::to_string(start));
  if (!g.has_node(goal)) throw UnknownNode("plan: unknown goal node " + std::to_string(goal));
  if (!(soc0_pct >= 0.0 && soc0_pct <= 100.0)) {
    throw InvalidArgument("plan: soc0 out of [0, 100]");
  }
  if (g.max_speed_kmh() > cfg.v_max_kmh) {
    throw InvalidArgument("plan: v_max below a graph speed limit");
  }
}

}  // namespace

void TeacherConfig::validate() const {
  if (w_t < 0.0 || w_e < 0.0 || w_c < 0.0) {
    throw InvalidArgument("teacher weights must be nonnegative");
  }
  if (tariff_p_min > tariff_p) {
    throw InvalidArgument("tariff_p_min must not exceed tariff_p");
  }
  if (!(v_max_kmh > 0.0)) throw InvalidArgument("v_max must be positive");
  if (n_exp < 1) throw InvalidArgument("n_exp must be >= 1");
  if (replan_period_tau < 1) throw InvalidArgument("replan period must be >= 1");
  if (!(soc_bucket_pct > 0.0 && soc_bucket_pct <= 100.0)) {
    throw InvalidArgument("soc_bucket_pct out of (0, 100]");
  }
  if (!(charge_cap_pct > 0.0 && charge_cap_pct <= 100.0)) {
    throw InvalidArgument("charge_cap_pct out of (0, 100]");
  }
}

double heuristic(const RoadGraph& g, int node, int goal, const TeacherConfig& cfg,
                 const VehicleParams& params) {
  const double d = haversine_km(g.node(node).pos, g.node(goal).pos);
  if (d == 0.0) return 0.0;
  const double time_min = 60.0 * d / cfg.v_max_kmh;
  const double energy = cruise_energy_kwh(d, cfg.v_max_kmh, params);
  return cfg.w_t * time_min + (cfg.w_e + cfg.w_c * cfg.tariff_p_min) * energy;
}

TeacherPlan plan(const RoadGraph& g, const TeacherConfig& cfg,
                 const VehicleParams& params, const ChargeCurve& curve,
                 int start, int goal, double soc0_pct) {
  check_plan_args(g, cfg, start, goal, soc0_pct);
  TeacherPlan result;
  if (start == goal) {
    result.feasible = true;
    return result;
  }

  std::vector<double> h_cache(g.size(), -1.0);
  auto h = [&](int node) {
    if (h_cache[node] < 0.0) h_cache[node] = heuristic(g, node, goal, cfg, params);
    return h_cache[node];
  };

  // Open entries ordered by (f, node, bucket); lowest node id breaks f ties.
  struct OpenEntry {
    double f;
    double cost;
    StateKey key;
  };
  auto cmp = [](const OpenEntry& a, const OpenEntry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.key.node != b.key.node) return a.key.node > b.key.node;
    return a.key.bucket > b.key.bucket;
  };
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, decltype(cmp)> open(cmp);
  std::unordered_map<StateKey, Label, StateKeyHash> labels;

  const StateKey start_key{start, bucket_of(soc0_pct, cfg.soc_bucket_pct)};
  labels[start_key] = Label{0.0, {-1, -1}, false};
  open.push({h(start), 0.0, start_key});

  std::int64_t expansions = 0;
  while (!open.empty() && expansions < cfg.n_exp) {
    const OpenEntry top = open.top();
    open.pop();
    Label& label = labels[top.key];
    if (label.settled || top.cost > label.cost) continue;  // stale entry
    label.settled = true;
    const double g_cost = label.cost;  // copy: inserts below may rehash
    ++expansions;

    if (top.key.node == goal) {
      result.path = rebuild_path(labels, top.key);
      result.cost = g_cost;
      result.feasible = true;
      result.expansions_used = expansions;
      return result;
    }

    for (const Edge& e : g.neighbors(top.key.node)) {
      const auto t = relax(g, cfg, params, curve, goal, top.key.bucket, e);
      if (!t) continue;
      const StateKey next{e.to, t->bucket};
      const double cost = g_cost + t->cost;
      auto [it, inserted] = labels.try_emplace(next);
      if (inserted || cost < it->second.cost) {
        it->second.cost = cost;
        it->second.parent = top.key;
        open.push({cost + h(e.to), cost, next});
      }
    }
  }

  // Budget exhausted or goal unreachable: best-effort prefix toward the
  // settled state closest to the goal by heuristic.
  StateKey best = start_key;
  double best_h = h(start), best_cost = 0.0;
  for (const auto& [key, label] : labels) {
    if (!label.settled) continue;
    const double hk = h(key.node);
    if (hk < best_h || (hk == best_h && label.cost < best_cost) ||
        (hk == best_h && label.cost == best_cost && key.node < best.node)) {
      best = key;
      best_h = hk;
      best_cost = label.cost;
    }
  }
  result.path = rebuild_path(labels, best);
  result.cost = best_cost;
  result.feasible = false;
  result.expansions_used = expansions;
  return result;
}

std::vector<int> shortlist(const TeacherPlan& plan, int current, const RoadGraph& g) {
  std::vector<int> slots;
  if (!plan.feasible || plan.path.empty() || plan.path.front() != current) {
    return slots;
  }
  const auto& nbrs = g.neighbors(current);
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    if (std::find(plan.path.begin(), plan.path.end(), nbrs[k].to) != plan.path.end()) {
      slots.push_back(static_cast<int>(k));
    }
  }
  return slots;
}

int greedy_hint(const RoadGraph& g, int current, int goal) {
  const auto& nbrs = g.neighbors(current);
  if (nbrs.empty()) {
    throw NoNeighbors("greedy_hint: node " + std::to_string(current) + " has no neighbors");
  }
  const GeoPoint goal_pos = g.node(goal).pos;
  int best_slot = 0;
  double best_d = kInf;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    const double d = haversine_km(g.node(nbrs[k].to).pos, goal_pos);
    if (d < best_d) {  // neighbors are id-sorted, so strict < keeps lowest id
      best_d = d;
      best_slot = static_cast<int>(k);
    }
  }
  return best_slot;
}

TeacherPlan oracle_optimal(const RoadGraph& g, const TeacherConfig& cfg,
                           const VehicleParams& params, const ChargeCurve& curve,
                           int start, int goal, double soc0_pct,
                           double soc_bucket_pct) {
  TeacherConfig oracle_cfg = cfg;
  oracle_cfg.soc_bucket_pct = soc_bucket_pct;
  oracle_cfg.n_exp = std::numeric_limits<std::int64_t>::max();
  check_plan_args(g, oracle_cfg, start, goal, soc0_pct);

  TeacherPlan result;
  if (start == goal) {
    result.feasible = true;
    return result;
  }

  // Plain label-correcting sweep: repeatedly relax every improvable label
  // until a fixed point. No priority queue, no heuristic, no budget.
  std::unordered_map<StateKey, Label, StateKeyHash> labels;
  const StateKey start_key{start, bucket_of(soc0_pct, soc_bucket_pct)};
  labels[start_key] = Label{0.0, {-1, -1}, true};

  bool changed = true;
  while (changed) {
    changed = false;
    // Snapshot keys first; relaxation may insert new labels.
    std::vector<StateKey> keys;
    keys.reserve(labels.size());
    for (const auto& [key, label] : labels) keys.push_back(key);
    for (const StateKey& key : keys) {
      const double base = labels[key].cost;
      for (const Edge& e : g.neighbors(key.node)) {
        const auto t = relax(g, oracle_cfg, params, curve, goal, key.bucket, e);
        if (!t) continue;
        const StateKey next{e.to, t->bucket};
        const double cost = base + t->cost;
        auto [it, inserted] = labels.try_emplace(next);
        if (inserted || cost < it->second.cost) {
          it->second.cost = cost;
          it->second.parent = key;
          it->second.settled = true;
          changed = true;
        }
      }
    }
  }

  StateKey best{-1, -1};
  double best_cost = kInf;
  for (const auto& [key, label] : labels) {
    if (key.node == goal && label.cost < best_cost) {
      best = key;
      best_cost = label.cost;
    }
  }
  result.expansions_used = static_cast<std::int64_t>(labels.size());
  if (best.node < 0) {
    result.path = {start};
    result.feasible = false;
    return result;
  }
  result.path = rebuild_path(labels, best);
  result.cost = best_cost;
  result.feasible = true;
  return result;
}

}  // namespace vega
