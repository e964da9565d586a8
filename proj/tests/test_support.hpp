#pragma once

// Independent oracles and fixture builders shared by the unit and acceptance
// suites. Everything here is deliberately written from first principles,
// separate from the library implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vega/charging.hpp"
#include "vega/energy.hpp"
#include "vega/road_graph.hpp"
#include "vega/kernels.hpp"
#include "vega/policy.hpp"
#include "vega/ppo.hpp"
#include "vega/teacher.hpp"

namespace vega_test {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(uniform01(rng) * n) % n;
}

// Great-circle distance by the spherical law of cosines; an implementation
// independent of the haversine formula (valid away from antipodes).
inline double law_of_cosines_km(const vega::GeoPoint& a, const vega::GeoPoint& b) {
  constexpr double rad = 3.14159265358979323846 / 180.0;
  const double s = std::sin(a.lat * rad) * std::sin(b.lat * rad) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) *
                       std::cos((b.lon - a.lon) * rad);
  return 6371.0 * std::acos(std::clamp(s, -1.0, 1.0));
}

struct RandomGraphOptions {
  int n_nodes = 10;
  double box_deg = 2.0;          // nodes scatter within a box this many degrees wide
  double edge_prob = 0.45;       // probability of a bidirectional pair
  double stretch_max = 0.4;      // edge length = haversine * (1 + U[0, stretch])
  double uniform_speed_kmh = 0;  // 0: draw per-edge from {60,80,100,120}
  double charger_prob = 0.35;
};

inline vega::RoadGraph random_geo_graph(std::uint64_t seed, const RandomGraphOptions& opt) {
  std::mt19937_64 rng(seed);
  std::vector<vega::Node> nodes;
  for (int i = 0; i < opt.n_nodes; ++i) {
    vega::Node n;
    n.id = i;
    n.pos = {uniform01(rng) * opt.box_deg, uniform01(rng) * opt.box_deg};
    n.is_charger = uniform01(rng) < opt.charger_prob;
    nodes.push_back(n);
  }
  const double speeds[4] = {60.0, 80.0, 100.0, 120.0};
  std::vector<vega::Edge> edges;
  for (int i = 0; i < opt.n_nodes; ++i) {
    for (int j = i + 1; j < opt.n_nodes; ++j) {
      if (uniform01(rng) >= opt.edge_prob) continue;
      const double d = vega::haversine_km(nodes[i].pos, nodes[j].pos);
      if (d < 1e-6) continue;
      const double len = d * (1.0 + opt.stretch_max * uniform01(rng));
      const double speed = opt.uniform_speed_kmh > 0.0
                               ? opt.uniform_speed_kmh
                               : speeds[uniform_int(rng, 4)];
      edges.push_back({i, j, len, speed});
      edges.push_back({j, i, len, speed});
    }
  }
  if (edges.empty()) {  // keep the graph legal
    edges.push_back({0, 1 % opt.n_nodes, 1.0, 100.0});
    edges.push_back({1 % opt.n_nodes, 0, 1.0, 100.0});
  }
  return vega::RoadGraph(std::move(nodes), std::move(edges));
}

// Exhaustive oracle: enumerates every walk through (node, SoC bucket) state
// space without repeating a state, replaying the teacher's transition
// semantics (SoC rounded down to the bucket after each transition, charge to
// the cap on arriving at any charger other than the goal, dwell priced into
// the time term). Charge-aware optima may revisit nodes at different SoC
// levels, so plain simple-path enumeration would miss them. Returns the
// cheapest feasible cost, or nullopt when the goal is unreachable.
inline std::optional<double> brute_force_cost(
    const vega::RoadGraph& g, const vega::TeacherConfig& cfg,
    const vega::VehicleParams& params, const vega::ChargeCurve& curve, int start,
    int goal, double soc0) {
  if (start == goal) return 0.0;
  std::optional<double> best;

  const auto bucket_of = [&](double soc) {
    return static_cast<int>(std::floor(soc / cfg.soc_bucket_pct + 1e-9));
  };
  std::vector<std::vector<bool>> visited(
      g.size(), std::vector<bool>(bucket_of(100.0) + 1, false));

  std::function<void(int, int, double)> dfs = [&](int node, int bucket, double cost) {
    if (node == goal) {
      if (!best || cost < *best) best = cost;
      return;
    }
    visited[node][bucket] = true;
    const double soc = bucket * cfg.soc_bucket_pct;
    for (const vega::Edge& e : g.neighbors(node)) {
      const vega::SegmentCost sc = vega::segment_cost(e, params);
      if (soc - sc.soc_drop_pct < 0.0) continue;
      double soc2 = soc - sc.soc_drop_pct;
      double c = cfg.w_t * (sc.time_h * 60.0) +
                 (cfg.w_e + cfg.w_c * cfg.tariff_p) * sc.energy_kwh;
      if (e.to != goal && g.node(e.to).is_charger && soc2 < cfg.charge_cap_pct) {
        c += cfg.w_t * vega::charge_time_min(curve, soc2, cfg.charge_cap_pct);
        soc2 = cfg.charge_cap_pct;
      }
      const int b2 = bucket_of(soc2);
      if (visited[e.to][b2]) continue;
      dfs(e.to, b2, cost + c);
    }
    visited[node][bucket] = false;
  };
  dfs(start, bucket_of(soc0), 0.0);
  return best;
}

// Literal transcription of the per-step reward ledger, kept independent of
// the environment implementation. All decision-time quantities are passed
// explicitly.
struct RewardOracleInput {
  double d_prev_km, d_now_km;
  double soc_before, soc_after;
  int action;              // 0..7 move, 8 charge
  bool at_charger;
  double dist_to_charger_km;
  int q_before;
  double session_start_soc;
  int t, episode_budget, stage;
  double charge_cap = 80.0;
};

struct RewardOracleOutput {
  double base, bat, chg, term, total;
};

inline RewardOracleOutput reward_oracle(const RewardOracleInput& in) {
  RewardOracleOutput out{};
  const double dd = in.d_prev_km - in.d_now_km;
  out.base = -1.0;
  out.base += 5.0 * std::max(dd, 0.0) + 2.0 * std::min(dd, 0.0);
  out.base += -0.1 * in.d_now_km + 10.0 * std::max(0.0, 5.0 - in.d_now_km);

  const bool charging = in.action == 8;
  if (in.soc_before < 15.0 && !charging) out.bat -= 100.0;
  if (in.soc_before >= 15.0 && in.soc_before < 25.0 && !charging) out.bat -= 50.0;
  if (in.soc_before < 40.0 && charging && in.at_charger) out.bat += 30.0;
  if (in.dist_to_charger_km < 3.0 && in.soc_before < 50.0) {
    out.bat += in.soc_before < 25.0 ? 25.0 : 10.0;
  }

  if (charging && !in.at_charger) out.chg -= 500.0;
  // Plugging in only starts a session when there is room below the cap.
  if (charging && in.at_charger && in.q_before == 0 && in.soc_before < in.charge_cap) {
    out.chg += 20.0;
  }
  if (charging && in.at_charger && in.q_before >= 2) out.chg += 10.0;
  if (charging && in.at_charger && in.q_before == 1) {
    if (in.session_start_soc < 20.0) out.chg += 300.0;
    else if (in.session_start_soc < 40.0) out.chg += 200.0;
    else out.chg += 150.0;
  }

  if (in.d_now_km < 5.0) out.term += 1000.0 + 2.0 * (in.episode_budget - in.t);
  double p_dep;
  switch (in.stage) {
    case 1: p_dep = 500.0; break;
    case 2: p_dep = 1000.0; break;
    case 3: p_dep = 1500.0; break;
    case 4: p_dep = 2000.0; break;
    case 5: p_dep = 3000.0; break;
    default: p_dep = 2000.0; break;
  }
  if (in.soc_after <= 0.0) out.term -= p_dep;
  if (in.t >= in.episode_budget) out.term -= 200.0;

  out.total = out.base + out.bat + out.chg + out.term;
  return out;
}

// Brute-force generalized-advantage estimate: the truncated double sum of
// discounted TD residuals, stopping at episode boundaries.
inline void brute_force_gae(const std::vector<double>& rewards,
                            const std::vector<double>& values,
                            const std::vector<std::uint8_t>& dones, double bootstrap,
                            double gamma, double lambda, std::vector<double>& adv) {
  const std::size_t n = rewards.size();
  adv.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next_v = k + 1 < n ? values[k + 1] : bootstrap;
      const double nonterminal = dones[k] ? 0.0 : 1.0;
      acc += w * (rewards[k] + gamma * next_v * nonterminal - values[k]);
      if (dones[k]) break;
      w *= gamma * lambda;
    }
    adv[t] = acc;
  }
}

// Central finite differences of a scalar function over a parameter vector.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> theta, double eps) {
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double hi = f(theta);
    theta[i] = saved - eps;
    const double lo = f(theta);
    theta[i] = saved;
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// 900-sample 1 Hz speed profile mixing acceleration, cruise, regen braking
// and idle phases; the estimator's standard synthetic excitation.
inline std::vector<double> varied_speed_profile(int n = 900) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const int phase = (i / 90) % 5;
    const double u = (i % 90) / 89.0;
    double s = 0.0;
    switch (phase) {
      case 0: s = 30.0 * u; break;                 // launch to 30 m/s
      case 1: s = 30.0; break;                     // fast cruise
      case 2: s = 30.0 - 20.0 * u; break;          // regen braking to 10
      case 3: s = 10.0 + 15.0 * u; break;          // build back to 25
      case 4: s = 25.0 - 25.0 * u; break;          // brake to rest
    }
    v[i] = std::max(0.0, s);
  }
  return v;
}

// Synthetic minibatch for gradient checks: random observations, masks with a
// few invalid slots, random executed actions and targets.
struct ToyBatch {
  int n;
  std::vector<double> obs;
  std::vector<std::uint8_t> mask;
  std::vector<int> actions;
  std::vector<double> logp_old, adv, ret;
};

inline ToyBatch make_toy_batch(const vega::PolicyNet& net, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ToyBatch b;
  b.n = n;
  b.obs.resize(static_cast<std::size_t>(n) * net.obs_dim());
  b.mask.assign(static_cast<std::size_t>(n) * net.act_dim(), 1);
  b.actions.resize(n);
  b.logp_old.resize(n);
  b.adv.resize(n);
  b.ret.resize(n);
  for (double& x : b.obs) x = uniform01(rng) * 2.0 - 1.0;
  for (int i = 0; i < n; ++i) {
    // Knock out up to three slots, keep at least one valid.
    for (int k = 0; k < 3; ++k) {
      b.mask[static_cast<std::size_t>(i) * net.act_dim() +
             uniform_int(rng, net.act_dim())] = 0;
    }
    b.mask[static_cast<std::size_t>(i) * net.act_dim() +
           uniform_int(rng, net.act_dim())] = 1;
    int a = uniform_int(rng, net.act_dim());
    while (!b.mask[static_cast<std::size_t>(i) * net.act_dim() + a]) {
      a = (a + 1) % net.act_dim();
    }
    b.actions[i] = a;
    b.logp_old[i] = -1.5 + uniform01(rng);  // stale-policy offsets
    b.adv[i] = uniform01(rng) * 2.0 - 1.0;
    b.ret[i] = uniform01(rng) * 2.0 - 1.0;
  }
  return b;
}

// The exact scalar objective ppo_update minimizes on one minibatch, written
// out independently for the finite-difference check.
inline double toy_loss(const vega::PolicyNet& net, const ToyBatch& b, const vega::PpoConfig& cfg) {
  std::vector<double> logits(static_cast<std::size_t>(b.n) * net.act_dim());
  std::vector<double> values(b.n);
  std::vector<double> logps(net.act_dim());
  vega::reference_policy_forward_batch(net, b.obs.data(), b.n, logits.data(), values.data(),
                                 nullptr);
  double pl = 0.0, vl = 0.0, ent = 0.0;
  for (int i = 0; i < b.n; ++i) {
    const double entropy =
        vega::masked_log_softmax(logits.data() + static_cast<std::size_t>(i) * net.act_dim(),
                           b.mask.data() + static_cast<std::size_t>(i) * net.act_dim(),
                           net.act_dim(), logps.data());
    const double ratio = std::exp(logps[b.actions[i]] - b.logp_old[i]);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    pl += -std::min(ratio * b.adv[i], clipped * b.adv[i]);
    vl += (values[i] - b.ret[i]) * (values[i] - b.ret[i]);
    ent += entropy;
  }
  const double inv = 1.0 / b.n;
  return pl * inv + cfg.value_coef * vl * inv - cfg.entropy_coef * ent * inv;
}

// Analytic gradient of toy_loss via the production backward kernel.
inline std::vector<double> toy_grad(const vega::PolicyNet& net, const ToyBatch& b, const vega::PpoConfig& cfg) {
  std::vector<double> logits(static_cast<std::size_t>(b.n) * net.act_dim());
  std::vector<double> values(b.n);
  std::vector<double> acts(static_cast<std::size_t>(b.n) * net.activation_count());
  std::vector<double> dlogits(static_cast<std::size_t>(b.n) * net.act_dim(), 0.0);
  std::vector<double> dvalues(b.n, 0.0);
  std::vector<double> logps(net.act_dim());
  vega::policy_forward_batch(net, b.obs.data(), b.n, logits.data(), values.data(), acts.data(),
                       vega::ExecMode::Serial);
  const double inv = 1.0 / b.n;
  for (int i = 0; i < b.n; ++i) {
    const double* lg = logits.data() + static_cast<std::size_t>(i) * net.act_dim();
    const std::uint8_t* mk = b.mask.data() + static_cast<std::size_t>(i) * net.act_dim();
    const double entropy = vega::masked_log_softmax(lg, mk, net.act_dim(), logps.data());
    const double ratio = std::exp(logps[b.actions[i]] - b.logp_old[i]);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double pg1 = ratio * b.adv[i];
    const double pg2 = clipped * b.adv[i];
    const double dlp = pg1 <= pg2 ? -ratio * b.adv[i] : 0.0;
    double* dl = dlogits.data() + static_cast<std::size_t>(i) * net.act_dim();
    for (int c = 0; c < net.act_dim(); ++c) {
      if (!mk[c]) continue;
      const double p_c = std::exp(logps[c]);
      dl[c] = inv * (dlp * ((c == b.actions[i] ? 1.0 : 0.0) - p_c) +
                     cfg.entropy_coef * p_c * (logps[c] + entropy));
    }
    dvalues[i] = inv * cfg.value_coef * 2.0 * (values[i] - b.ret[i]);
  }
  std::vector<double> grad;
  vega::policy_backward_batch(net, b.obs.data(), b.n, acts.data(), dlogits.data(),
                        dvalues.data(), grad, vega::ExecMode::Serial);
  return grad;
}


}  // namespace vega_test
