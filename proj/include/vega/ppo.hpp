#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "vega/env.hpp"
#include "vega/kernels.hpp"
#include "vega/policy.hpp"

namespace vega {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  // Rewards are multiplied by this inside GAE so value targets stay O(10)
  // even with shaping bonuses in the hundreds; logged returns stay raw and
  // normalized advantages are invariant to it.
  double reward_scale = 0.01;
  // When positive, the trainer steers the rollout entropy toward this value
  // by scaling entropy_coef multiplicatively between updates (bounded by
  // the min/max below). Guards against irreversible policy saturation while
  // a stage still needs exploration; zero disables the controller.
  double entropy_target = 0.0;
  double entropy_coef_min = 1e-4;
  double entropy_coef_max = 0.3;
  int epochs = 4;
  int minibatch = 256;
  std::vector<int> hidden = {128, 128};
  std::uint64_t seed = 1;

  void validate() const;
};

struct StageConfig {
  int stage = 1;
  bool expanded = false;
  int max_episodes = 400;
  // Optional per-stage schedule overrides; negative means inherit the
  // training-wide value. The teacher-follow schedule is stage-dependent.
  double p_follow_start = -1.0;
  double p_follow_end = -1.0;
  double entropy_coef = -1.0;
  double gate_success_rate = -1.0;
};

struct TrainConfig {
  PpoConfig ppo;
  EnvConfig env;
  TeacherConfig teacher;
  int n_envs = 8;
  double lr_start = 3e-4;
  double lr_end = 1e-4;
  int batch_start = 2048;
  int batch_end = 8192;
  double p_follow_start = 0.8;
  double p_follow_end = 0.05;
  double gate_success_rate = 0.8;
  int gate_window = 50;
  std::vector<StageConfig> stages;  // empty: base stages 1..6
  bool parallel = true;

  void validate() const;
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static TrainConfig load(const std::string& path);
  // FNV-1a hash of the canonical JSON dump, stored in checkpoints.
  std::string config_hash() const;
};

struct EpisodeStats {
  double ret = 0.0;
  int steps = 0;
  DoneReason outcome = DoneReason::None;
  int invalid_charges = 0;
  int sessions_completed = 0;
  double dwell_min = 0.0;
  double min_soc = 100.0;
  double compliance_rate = 0.0;
};

// One rollout's worth of transitions in env-major layout:
// flat index = env * n_steps + t.
struct RolloutBatch {
  int n_envs = 0;
  int n_steps = 0;
  std::vector<double> obs;          // n x obs_dim
  std::vector<std::uint8_t> mask;   // n x act_dim
  std::vector<int> actions;         // n
  std::vector<double> logp_old;     // n, executed action under the student
  std::vector<double> rewards;      // n
  std::vector<double> values;       // n
  std::vector<std::uint8_t> dones;  // n, episode ended at this step
  std::vector<double> bootstrap;    // n_envs, V(obs after the last step)
  std::vector<double> advantages;   // n
  std::vector<double> returns;      // n
  std::vector<std::uint8_t> compliance;  // g_t
  std::vector<std::uint8_t> overridden;  // teacher substitution happened
  std::vector<EpisodeStats> episodes;    // episodes completed in this batch

  int size() const { return n_envs * n_steps; }
};

// One environment plus its private RNG stream and teacher-plan cache.
// Runner seeds derive from (master seed, runner index, reset counter), so
// batches are reproducible regardless of thread scheduling.
class EnvRunner {
 public:
  EnvRunner(EvEnv env, std::uint64_t master_seed, int index);

  void reset_episode();
  EvEnv& env() { return env_; }
  const Observation& current_obs() const { return obs_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  friend RolloutBatch collect_rollouts(std::vector<EnvRunner>&, const PolicyNet&,
                                       const PpoConfig&, double, int, bool, ExecMode);
  EvEnv env_;
  std::uint64_t master_seed_;
  int index_;
  std::uint64_t reset_count_ = 0;
  std::mt19937_64 rng_;
  Observation obs_{};
  TeacherPlan cached_plan_{};
  int steps_since_replan_ = 1 << 30;
  EpisodeStats ep_{};
  int ep_compliant_ = 0;
};

// Runs every environment for n_steps, sampling the student policy and with
// probability p_follow executing the teacher suggestion instead (a shortlist
// member when the cached plan applies, else the greedy hint). The log-prob
// stored is always the student's log-prob of the executed action; teacher
// advice never reaches the observations. Deterministic per runner seeds.
RolloutBatch collect_rollouts(std::vector<EnvRunner>& runners, const PolicyNet& net,
                              const PpoConfig& cfg, double p_follow, int n_steps,
                              bool teacher_enabled = true,
                              ExecMode mode = ExecMode::Parallel);

// Standard GAE over a single reward stream. `values` has one entry per step;
// `bootstrap` is V of the state after the last step (ignored past a done).
// returns[t] = advantages[t] + values[t].
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double bootstrap,
                 double gamma, double lambda, std::vector<double>& advantages,
                 std::vector<double>& returns);

// Env-major batch version; fills batch.advantages / batch.returns.
// Rewards are scaled by `reward_scale` before the recursion.
void compute_gae(RolloutBatch& batch, double gamma, double lambda,
                 double reward_scale = 1.0);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
};

// Clipped-surrogate update with minibatched epochs. Advantages are
// normalized over the whole batch (std floor 1e-8) before use. On any
// non-finite loss or gradient the prior weights are restored and
// NonFiniteLoss is thrown.
UpdateStats ppo_update(PolicyNet& net, Adam& adam, RolloutBatch& batch,
                       const PpoConfig& cfg, double lr, std::mt19937_64& rng,
                       ExecMode mode = ExecMode::Parallel);

struct LogRow {
  int stage = 0;
  std::int64_t episode = 0;
  double ret = 0.0;
  int success = 0;
  double compliance = 0.0;
  double lr = 0.0;
  int batch = 0;
};

struct StageSummary {
  int stage = 0;
  bool expanded = false;
  bool skipped = false;
  std::int64_t episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double compliance_rate = 0.0;
  double depletion_rate = 0.0;
};

struct TrainResult {
  PolicyNet net;
  std::vector<LogRow> rows;
  std::vector<StageSummary> summaries;
};

// Writes the training log CSV (stage,episode,return,success,compliance,lr,batch)
// with shortest round-trip float formatting; byte-identical across runs with
// the same seed and config.
void write_training_log(std::ostream& out, const std::vector<LogRow>& rows);

// Staged curriculum training. Stages that cannot place a goal at their
// target distance are skipped with a warning on `diag`. Learning rate
// decays and the batch size grows linearly across the stage list; p_follow
// decays exponentially within each stage.
TrainResult train(const RoadGraph& g, const VehicleParams& params,
                  const ChargeCurve& curve, const TrainConfig& cfg,
                  std::ostream* diag = nullptr);

struct EvalStats {
  int episodes = 0;
  double success_rate = 0.0;
  double depletion_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_stops = 0.0;
  double mean_dwell_min = 0.0;  // per completed charging session
  double mean_min_soc = 0.0;
  std::int64_t invalid_charge_actions = 0;
  std::int64_t total_actions = 0;
};

// Greedy (argmax) or sampled rollouts of a fixed policy over `n_episodes`
// curriculum resets of `env`.
EvalStats evaluate(const PolicyNet& net, EvEnv& env, int n_episodes,
                   bool deterministic, std::uint64_t seed);

// Deterministic stream-splitting helper used for runner/reset seeds.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace vega
