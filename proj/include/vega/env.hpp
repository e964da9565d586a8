#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "vega/charging.hpp"
#include "vega/energy.hpp"
#include "vega/road_graph.hpp"
#include "vega/teacher.hpp"

namespace vega {

inline constexpr int kObservationDim = 26;
inline constexpr int kActionCount = 9;      // slots 0..7 move, slot 8 charges
inline constexpr int kChargeAction = 8;
inline constexpr int kMaxNeighborSlots = 8;

struct EnvConfig {
  double success_radius_km = 5.0;
  double low_soc_pct = 25.0;
  double critical_soc_pct = 15.0;
  double charge_cap_pct = 80.0;
  double initial_soc_pct = 80.0;
  int episode_budget = 0;  // 0: derive 2 + ceil(4 * D0 / mean hop) at reset
  double charge_step_minutes = 10.0;
  int stage = 1;
  bool expanded_curriculum = false;
  // Strict mode rejects movement slots >= out-degree with InvalidActionSlot;
  // otherwise they clamp to the highest valid slot (trainer masks instead).
  bool strict_action_slots = true;
  // Reads the goal-distance term of the base reward as a function of the
  // step's distance change instead of the remaining distance (A/B switch).
  bool literal_delta_distance_term = false;

  void validate() const;
};

enum class DoneReason { None, Success, Depleted, Timeout };

const char* to_string(DoneReason r);

struct EnvState {
  int current = 0;
  int goal = 0;
  double soc_pct = 0.0;
  int step = 0;
  double dist_to_goal_km = 0.0;
  int charging_steps_remaining = 0;
  double session_start_soc = 0.0;
  DoneReason done_reason = DoneReason::None;
};

nlohmann::json to_json(const EnvState& s);

struct Observation {
  std::array<double, kObservationDim> v{};
};

// Observation layout. Core block (13):
//   0..3  current/goal lat-lon, min-max normalized to the graph bbox
//   4     distance to goal / initial distance
//   5     soc / 100
//   6     at-charger flag
//   7     progress ratio t / N_eps
//   8     step efficiency: distance change / mean hop, clamped to [-1, 1]
//   9     critical-soc flag (soc < critical)
//   10    low-soc flag (soc < low)
//   11    near-goal flag (D < success radius)
//   12    near-charger flag (charger within 3 km)
// Context block (13):
//   13    charger distance / initial distance, clamped to [0, 1]
//   14    charging steps remaining / max session steps
//   15..22  per-slot neighbor distance to goal / initial distance,
//           clamped to [0, 1]; missing slots carry sentinel 1.0
//   23    stage / 12
//   24    neighbor count / 8
//   25    episode progress t / N_eps
enum ObsSlot : int {
  kObsLatCur = 0,
  kObsLonCur = 1,
  kObsLatGoal = 2,
  kObsLonGoal = 3,
  kObsDistToGoal = 4,
  kObsSoc = 5,
  kObsAtCharger = 6,
  kObsProgress = 7,
  kObsStepEfficiency = 8,
  kObsDangerCritical = 9,
  kObsDangerLow = 10,
  kObsNearGoal = 11,
  kObsNearCharger = 12,
  kObsChargerDist = 13,
  kObsChargeStepsLeft = 14,
  kObsNeighborDist0 = 15,  // ..22
  kObsStage = 23,
  kObsNeighborCount = 24,
  kObsEpisodeProgress = 25,
};

struct RewardBreakdown {
  double base = 0.0;
  double bat = 0.0;
  double chg = 0.0;
  double term = 0.0;
  double total = 0.0;  // always the exact sum of the four components
};

nlohmann::json to_json(const RewardBreakdown& r);

// Per-step shaping: step penalty, progress/backtracking terms on the
// distance change, plus the distance penalty and the proximity bonus on the
// remaining distance (or on the distance change in literal mode).
double reward_base(double d_prev_km, double d_now_km, bool literal_delta_term = false);

// Battery shaping on decision-time values: critical/low-SoC penalties for
// not charging, the charge-decision bonus, and the near-charger hint tiers.
double reward_battery(double soc_pct, int action, bool at_charger,
                      double dist_to_charger_km);

// Stage-dependent depletion penalty (positive magnitude).
double depletion_penalty(int stage);

// Target route length for a curriculum stage. The base schedule has six
// stages; the expanded schedule twelve (the base six plus longer distances
// that force charging stops). Throws UnknownStage.
double curriculum_distance_km(int stage, bool expanded);

struct StepInfo {
  bool moved = false;
  Edge edge{};                 // valid when moved
  double charge_minutes = 0.0; // effective minutes of charge advanced
  bool session_started = false;
  bool session_completed = false;
  bool invalid_charge = false; // charge action away from a charger
};

struct StepResult {
  EnvState state;
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
  StepInfo info;
};

// One agent's world. A single instance is single-threaded; many instances
// may share one immutable graph.
class EvEnv {
 public:
  EvEnv(const RoadGraph& g, EnvConfig cfg, VehicleParams params,
        ChargeCurve curve, TeacherConfig teacher_cfg = {});

  // Curriculum reset: start node, then a goal drawn from a teacher-proposed
  // path whose distance from the start is within 20% of the stage target.
  // Deterministic per seed. Throws NoGoalAtDistance.
  std::pair<EnvState, Observation> reset(std::uint64_t seed);

  std::pair<EnvState, Observation> reset_manual(int start, int goal, double soc0_pct);

  StepResult step(int action);

  const EnvState& state() const { return state_; }
  Observation observation() const;
  std::array<std::uint8_t, kActionCount> action_mask() const;

  const RoadGraph& graph() const { return *graph_; }
  const VehicleParams& params() const { return params_; }
  const ChargeCurve& curve() const { return curve_; }
  const EnvConfig& config() const { return cfg_; }
  const TeacherConfig& teacher_config() const { return teacher_cfg_; }
  int episode_budget() const { return episode_budget_; }
  double initial_distance_km() const { return initial_distance_km_; }

 private:
  void init_episode(int start, int goal, double soc0_pct);

  const RoadGraph* graph_;
  EnvConfig cfg_;
  VehicleParams params_;
  ChargeCurve curve_;
  TeacherConfig teacher_cfg_;
  EnvState state_{};
  int episode_budget_ = 1;
  double initial_distance_km_ = 0.0;
  double last_step_distance_change_km_ = 0.0;
  int max_session_steps_ = 1;
};

void write_trace_record(std::ostream& out, const EnvState& s, int action,
                        const RewardBreakdown& r);

}  // namespace vega
