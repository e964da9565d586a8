#include "vega/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vega/errors.hpp"

namespace vega {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(uniform01(rng) * n) % n;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void EnvConfig::validate() const {
  if (!(0.0 < critical_soc_pct && critical_soc_pct < low_soc_pct &&
        low_soc_pct < charge_cap_pct && charge_cap_pct <= 100.0)) {
    throw InvalidArgument("env config requires 0 < critical < low < cap <= 100");
  }
  if (episode_budget < 0) throw InvalidArgument("episode budget must be >= 0");
  if (!(success_radius_km > 0.0)) throw InvalidArgument("success radius must be positive");
  if (!(charge_step_minutes > 0.0)) throw InvalidArgument("charge step must be positive");
  if (!(initial_soc_pct >= 0.0 && initial_soc_pct <= 100.0)) {
    throw InvalidArgument("initial soc out of [0, 100]");
  }
  if (stage < 1) throw InvalidArgument("stage must be >= 1");
}

const char* to_string(DoneReason r) {
  switch (r) {
    case DoneReason::None: return "none";
    case DoneReason::Success: return "success";
    case DoneReason::Depleted: return "depleted";
    case DoneReason::Timeout: return "timeout";
  }
  return "none";
}

nlohmann::json to_json(const EnvState& s) {
  return nlohmann::json{{"current", s.current},
                        {"goal", s.goal},
                        {"soc_pct", s.soc_pct},
                        {"step", s.step},
                        {"dist_to_goal_km", s.dist_to_goal_km},
                        {"charging_steps_remaining", s.charging_steps_remaining},
                        {"session_start_soc", s.session_start_soc},
                        {"done_reason", to_string(s.done_reason)}};
}

nlohmann::json to_json(const RewardBreakdown& r) {
  return nlohmann::json{{"base", r.base}, {"bat", r.bat}, {"chg", r.chg},
                        {"term", r.term}, {"total", r.total}};
}

double reward_base(double d_prev_km, double d_now_km, bool literal_delta_term) {
  if (d_prev_km < 0.0 || d_now_km < 0.0) {
    throw InvalidArgument("reward_base: distances must be nonnegative");
  }
  const double delta = d_prev_km - d_now_km;
  const double progress = 5.0 * std::max(delta, 0.0) + 2.0 * std::min(delta, 0.0);
  const double goal_term = literal_delta_term
                               ? -0.1 * delta + 10.0 * std::max(0.0, 5.0 - delta)
                               : -0.1 * d_now_km + 10.0 * std::max(0.0, 5.0 - d_now_km);
  return -1.0 + progress + goal_term;
}

double reward_battery(double soc_pct, int action, bool at_charger,
                      double dist_to_charger_km) {
  if (!(soc_pct >= 0.0 && soc_pct <= 100.0)) {
    throw InvalidArgument("reward_battery: soc out of [0, 100]");
  }
  double r = 0.0;
  const bool charging = action == kChargeAction;
  if (soc_pct < 15.0 && !charging) r += -100.0;
  if (soc_pct >= 15.0 && soc_pct < 25.0 && !charging) r += -50.0;
  if (soc_pct < 40.0 && charging && at_charger) r += 30.0;
  if (dist_to_charger_km < 3.0 && soc_pct < 50.0) {
    if (soc_pct < 25.0) {
      r += 25.0;
    } else {
      r += 10.0;
    }
  }
  return r;
}

double depletion_penalty(int stage) {
  switch (stage) {
    case 1: return 500.0;
    case 2: return 1000.0;
    case 3: return 1500.0;
    case 4: return 2000.0;
    case 5: return 3000.0;
    default: return 2000.0;
  }
}

double curriculum_distance_km(int stage, bool expanded) {
  static const double base[] = {10.0, 25.0, 50.0, 100.0, 200.0, 300.0};
  // The expanded schedule folds the base distances in with the long-haul
  // targets; twelve stages in total, the last at 3000 km.
  static const double ext[] = {10.0,  25.0,  50.0,   100.0,  200.0,  300.0,
                               400.0, 600.0, 1000.0, 1500.0, 2500.0, 3000.0};
  if (!expanded) {
    if (stage < 1 || stage > 6) {
      throw UnknownStage("base curriculum stage out of 1..6: " + std::to_string(stage));
    }
    return base[stage - 1];
  }
  if (stage < 1 || stage > 12) {
    throw UnknownStage("expanded curriculum stage out of 1..12: " + std::to_string(stage));
  }
  return ext[stage - 1];
}

EvEnv::EvEnv(const RoadGraph& g, EnvConfig cfg, VehicleParams params,
             ChargeCurve curve, TeacherConfig teacher_cfg)
    : graph_(&g),
      cfg_(cfg),
      params_(std::move(params)),
      curve_(std::move(curve)),
      teacher_cfg_(teacher_cfg) {
  cfg_.validate();
  params_.validate();
  teacher_cfg_.validate();
  max_session_steps_ = std::max(
      1, static_cast<int>(std::ceil(
             charge_time_min(curve_, 0.0, cfg_.charge_cap_pct) / cfg_.charge_step_minutes)));
}

void EvEnv::init_episode(int start, int goal, double soc0_pct) {
  state_ = EnvState{};
  state_.current = start;
  state_.goal = goal;
  state_.soc_pct = soc0_pct;
  state_.dist_to_goal_km = haversine_km(graph_->node(start).pos, graph_->node(goal).pos);
  initial_distance_km_ = std::max(state_.dist_to_goal_km, 1e-9);
  last_step_distance_change_km_ = 0.0;
  const double hop = std::max(graph_->mean_edge_length_km(), 1e-9);
  episode_budget_ = cfg_.episode_budget > 0
                        ? cfg_.episode_budget
                        : 2 + static_cast<int>(std::ceil(4.0 * initial_distance_km_ / hop));
}

std::pair<EnvState, Observation> EvEnv::reset(std::uint64_t seed) {
  const double target = curriculum_distance_km(cfg_.stage, cfg_.expanded_curriculum);
  const double lo = 0.8 * target, hi = 1.2 * target;
  std::mt19937_64 rng(seed);
  const int n = graph_->size();
  for (int attempt = 0; attempt < 512; ++attempt) {
    const int start = uniform_int(rng, n);
    if (n < 2) break;
    int far = uniform_int(rng, n - 1);
    if (far >= start) ++far;
    const TeacherPlan tp =
        plan(*graph_, teacher_cfg_, params_, curve_, start, far, cfg_.initial_soc_pct);
    std::vector<int> candidates;
    for (int node : tp.path) {
      if (node == start) continue;
      const double d = haversine_km(graph_->node(start).pos, graph_->node(node).pos);
      if (d >= lo && d <= hi) candidates.push_back(node);
    }
    if (!candidates.empty()) {
      const int goal = candidates[uniform_int(rng, static_cast<int>(candidates.size()))];
      init_episode(start, goal, cfg_.initial_soc_pct);
      return {state_, observation()};
    }
  }
  throw NoGoalAtDistance("no teacher-path goal within [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "] km for stage " + std::to_string(cfg_.stage));
}

std::pair<EnvState, Observation> EvEnv::reset_manual(int start, int goal, double soc0_pct) {
  if (!graph_->has_node(start) || !graph_->has_node(goal)) {
    throw UnknownNode("reset_manual: node not in graph");
  }
  if (!(soc0_pct >= 0.0 && soc0_pct <= 100.0)) {
    throw InvalidArgument("reset_manual: soc0 out of [0, 100]");
  }
  init_episode(start, goal, soc0_pct);
  return {state_, observation()};
}

std::array<std::uint8_t, kActionCount> EvEnv::action_mask() const {
  std::array<std::uint8_t, kActionCount> mask{};
  const int degree =
      std::min<int>(kMaxNeighborSlots, static_cast<int>(graph_->neighbors(state_.current).size()));
  for (int k = 0; k < degree; ++k) mask[k] = 1;
  mask[kChargeAction] = 1;  // misuse is priced by the reward, never masked
  return mask;
}

StepResult EvEnv::step(int action) {
  if (state_.done_reason != DoneReason::None) {
    throw EpisodeDone("step() called on a finished episode");
  }
  if (action < 0 || action >= kActionCount) {
    throw InvalidActionSlot("action out of 0..8: " + std::to_string(action));
  }

  // Decision-time values feed the battery shaping and session bonuses.
  const double soc_before = state_.soc_pct;
  const double d_prev = state_.dist_to_goal_km;
  const bool at_charger = graph_->node(state_.current).is_charger;
  const double d_chg = graph_->charger_distance_km(state_.current);
  const int q_before = state_.charging_steps_remaining;

  state_.step += 1;
  const int t = state_.step;

  StepInfo info;
  double chg_reward = 0.0;

  if (action == kChargeAction) {
    if (!at_charger) {
      chg_reward += -500.0;
      info.invalid_charge = true;
      // No-op move: the agent stays put for the step.
    } else if (q_before == 0) {
      // A session only begins when there is room to charge; at or above the
      // cap the plug-in is inert, so bonus-farming at a full pack pays
      // nothing.
      if (soc_before < cfg_.charge_cap_pct) {
        state_.session_start_soc = soc_before;
        const double remaining =
            charge_time_min(curve_, soc_before, cfg_.charge_cap_pct);
        state_.charging_steps_remaining =
            static_cast<int>(std::ceil(remaining / cfg_.charge_step_minutes));
        chg_reward += 20.0;
        info.session_started = true;
      }
    } else {
      const double remaining = charge_time_min(
          curve_, std::min(state_.soc_pct, cfg_.charge_cap_pct), cfg_.charge_cap_pct);
      info.charge_minutes = std::min(cfg_.charge_step_minutes, remaining);
      state_.soc_pct = std::min(
          cfg_.charge_cap_pct,
          soc_after_charging(curve_, state_.soc_pct, cfg_.charge_step_minutes));
      state_.charging_steps_remaining -= 1;
      if (q_before == 1) {
        state_.soc_pct = std::max(state_.soc_pct, cfg_.charge_cap_pct);  // close out exactly
        if (state_.session_start_soc < 20.0) {
          chg_reward += 300.0;
        } else if (state_.session_start_soc < 40.0) {
          chg_reward += 200.0;
        } else {
          chg_reward += 150.0;
        }
        info.session_completed = true;
      } else {
        chg_reward += 10.0;  // q_before >= 2
      }
    }
  } else {
    const auto& nbrs = graph_->neighbors(state_.current);
    const int degree = std::min<int>(kMaxNeighborSlots, static_cast<int>(nbrs.size()));
    int slot = action;
    if (slot >= degree) {
      if (cfg_.strict_action_slots) {
        throw InvalidActionSlot("movement slot " + std::to_string(slot) + " >= out-degree " +
                                std::to_string(degree));
      }
      slot = degree - 1;  // clamp; trainers mask instead
    }
    if (slot >= 0) {
      const Edge& e = nbrs[slot];
      const SegmentCost sc = segment_cost(e, params_);
      state_.soc_pct -= sc.soc_drop_pct;
      state_.current = e.to;
      state_.charging_steps_remaining = 0;  // moving abandons any session
      info.moved = true;
      info.edge = e;
    }
    // slot < 0 only when a non-strict env sits on a dead-end node: stay put.
  }

  const double d_now = haversine_km(graph_->node(state_.current).pos,
                                    graph_->node(state_.goal).pos);
  last_step_distance_change_km_ = d_prev - d_now;
  state_.dist_to_goal_km = d_now;

  RewardBreakdown r;
  r.base = reward_base(d_prev, d_now, cfg_.literal_delta_distance_term);
  r.bat = reward_battery(soc_before, action, at_charger, d_chg);
  r.chg = chg_reward;
  const double soc_after = state_.soc_pct;
  if (d_now < cfg_.success_radius_km) {
    r.term += 1000.0 + 2.0 * (episode_budget_ - t);
  }
  if (soc_after <= 0.0) {
    r.term -= depletion_penalty(cfg_.stage);
  }
  if (t >= episode_budget_) {
    r.term -= 200.0;
  }
  r.total = r.base + r.bat + r.chg + r.term;

  if (soc_after <= 0.0) {
    state_.done_reason = DoneReason::Depleted;
    state_.soc_pct = std::max(state_.soc_pct, 0.0);
  } else if (d_now < cfg_.success_radius_km) {
    state_.done_reason = DoneReason::Success;
  } else if (t >= episode_budget_) {
    state_.done_reason = DoneReason::Timeout;
  }

  StepResult out;
  out.state = state_;
  out.obs = observation();
  out.reward = r;
  out.done = state_.done_reason != DoneReason::None;
  out.info = info;
  return out;
}

Observation EvEnv::observation() const {
  Observation o;
  const auto& bbox = graph_->bbox();
  const auto norm = [](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
  };
  const GeoPoint cur = graph_->node(state_.current).pos;
  const GeoPoint goal = graph_->node(state_.goal).pos;
  const double d0 = initial_distance_km_;

  o.v[kObsLatCur] = norm(cur.lat, bbox.lat_min, bbox.lat_max);
  o.v[kObsLonCur] = norm(cur.lon, bbox.lon_min, bbox.lon_max);
  o.v[kObsLatGoal] = norm(goal.lat, bbox.lat_min, bbox.lat_max);
  o.v[kObsLonGoal] = norm(goal.lon, bbox.lon_min, bbox.lon_max);
  o.v[kObsDistToGoal] = clamp01(state_.dist_to_goal_km / d0);
  o.v[kObsSoc] = state_.soc_pct / 100.0;
  o.v[kObsAtCharger] = graph_->node(state_.current).is_charger ? 1.0 : 0.0;
  o.v[kObsProgress] = clamp01(static_cast<double>(state_.step) / episode_budget_);
  const double hop = std::max(graph_->mean_edge_length_km(), 1e-9);
  o.v[kObsStepEfficiency] = std::clamp(last_step_distance_change_km_ / hop, -1.0, 1.0);
  o.v[kObsDangerCritical] = state_.soc_pct < cfg_.critical_soc_pct ? 1.0 : 0.0;
  o.v[kObsDangerLow] = state_.soc_pct < cfg_.low_soc_pct ? 1.0 : 0.0;
  o.v[kObsNearGoal] = state_.dist_to_goal_km < cfg_.success_radius_km ? 1.0 : 0.0;
  const double d_chg = graph_->charger_distance_km(state_.current);
  o.v[kObsNearCharger] = d_chg < 3.0 ? 1.0 : 0.0;

  o.v[kObsChargerDist] = std::isfinite(d_chg) ? clamp01(d_chg / d0) : 1.0;
  o.v[kObsChargeStepsLeft] =
      clamp01(static_cast<double>(state_.charging_steps_remaining) / max_session_steps_);
  const auto& nbrs = graph_->neighbors(state_.current);
  const int degree = std::min<int>(kMaxNeighborSlots, static_cast<int>(nbrs.size()));
  for (int k = 0; k < kMaxNeighborSlots; ++k) {
    o.v[kObsNeighborDist0 + k] =
        k < degree ? clamp01(haversine_km(graph_->node(nbrs[k].to).pos, goal) / d0) : 1.0;
  }
  o.v[kObsStage] = clamp01(cfg_.stage / 12.0);
  o.v[kObsNeighborCount] = static_cast<double>(degree) / kMaxNeighborSlots;
  o.v[kObsEpisodeProgress] = o.v[kObsProgress];
  return o;
}

void write_trace_record(std::ostream& out, const EnvState& s, int action,
                        const RewardBreakdown& r) {
  nlohmann::json rec{{"state", to_json(s)}, {"action", action}, {"reward", to_json(r)},
                     {"done_reason", to_string(s.done_reason)}};
  out << rec.dump() << '\n';
}

}  // namespace vega
