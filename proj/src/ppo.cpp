#include "vega/ppo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>

#include "vega/errors.hpp"

namespace vega {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over a combined word.
  std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xBF58476D1CE4E5B9ULL);
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma out of (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) throw InvalidArgument("gae_lambda out of (0, 1]");
  if (!(clip_eps > 0.0)) throw InvalidArgument("clip_eps must be positive");
  if (entropy_coef < 0.0 || value_coef < 0.0) throw InvalidArgument("loss coefs must be >= 0");
  if (!(reward_scale > 0.0)) throw InvalidArgument("reward_scale must be positive");
  if (epochs < 1 || minibatch < 1) throw InvalidArgument("epochs/minibatch must be >= 1");
}

void TrainConfig::validate() const {
  ppo.validate();
  env.validate();
  teacher.validate();
  if (n_envs < 1) throw InvalidArgument("n_envs must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0) || lr_end > lr_start) {
    throw InvalidArgument("learning rate schedule must be positive and nonincreasing");
  }
  if (batch_start < n_envs || batch_end < batch_start) {
    throw InvalidArgument("batch schedule must be nondecreasing and >= n_envs");
  }
  if (!(p_follow_start >= 0.0 && p_follow_start <= 1.0) ||
      !(p_follow_end >= 0.0 && p_follow_end <= p_follow_start)) {
    throw InvalidArgument("p_follow schedule must decay within [0, 1]");
  }
  if (!(gate_success_rate >= 0.0 && gate_success_rate <= 1.0) || gate_window < 1) {
    throw InvalidArgument("bad stage gate");
  }
}

EnvRunner::EnvRunner(EvEnv env, std::uint64_t master_seed, int index)
    : env_(std::move(env)),
      master_seed_(master_seed),
      index_(index),
      rng_(split_seed(master_seed, 0x5A5A5A5AULL, static_cast<std::uint64_t>(index))) {}

void EnvRunner::reset_episode() {
  const std::uint64_t seed =
      split_seed(master_seed_, static_cast<std::uint64_t>(index_) + 1, reset_count_++);
  obs_ = env_.reset(seed).second;
  cached_plan_ = TeacherPlan{};
  steps_since_replan_ = 1 << 30;
  ep_ = EpisodeStats{};
  ep_compliant_ = 0;
}

RolloutBatch collect_rollouts(std::vector<EnvRunner>& runners, const PolicyNet& net,
                              const PpoConfig& cfg, double p_follow, int n_steps,
                              bool teacher_enabled, ExecMode mode) {
  cfg.validate();
  const int n_envs = static_cast<int>(runners.size());
  if (n_envs < 1 || n_steps < 1) throw InvalidArgument("need >= 1 env and >= 1 step");
  const int obs_dim = net.obs_dim();
  const int act_dim = net.act_dim();

  RolloutBatch batch;
  batch.n_envs = n_envs;
  batch.n_steps = n_steps;
  const int n = n_envs * n_steps;
  batch.obs.resize(static_cast<std::size_t>(n) * obs_dim);
  batch.mask.resize(static_cast<std::size_t>(n) * act_dim);
  batch.actions.resize(n);
  batch.logp_old.resize(n);
  batch.rewards.resize(n);
  batch.values.resize(n);
  batch.dones.resize(n);
  batch.bootstrap.resize(n_envs);
  batch.compliance.resize(n);
  batch.overridden.resize(n);

  std::vector<std::vector<EpisodeStats>> finished(n_envs);

  const bool parallel = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (int e = 0; e < n_envs; ++e) {
    EnvRunner& runner = runners[e];
    EvEnv& env = runner.env_;
    const RoadGraph& g = env.graph();
    std::array<double, kActionCount> logits{};
    std::array<double, kActionCount> logps{};

    for (int t = 0; t < n_steps; ++t) {
      const std::size_t i = static_cast<std::size_t>(e) * n_steps + t;
      const auto mask = env.action_mask();
      std::copy(runner.obs_.v.begin(), runner.obs_.v.end(), batch.obs.begin() + i * obs_dim);
      std::copy(mask.begin(), mask.end(), batch.mask.begin() + i * act_dim);

      double value = 0.0;
      net.forward(runner.obs_.v.data(), logits.data(), &value, nullptr);
      masked_log_softmax(logits.data(), mask.data(), act_dim, logps.data());
      const double u_action = uniform01(runner.rng_);
      const int student_action = sample_masked(logps.data(), mask.data(), act_dim, u_action);
      const bool follow_coin = uniform01(runner.rng_) < p_follow;

      // Teacher context: cached plan for the shortlist, greedy hint fallback.
      int hint_slot = -1;
      std::vector<int> short_slots;
      if (teacher_enabled) {
        const EnvState& s = env.state();
        if (runner.steps_since_replan_ >= env.teacher_config().replan_period_tau ||
            runner.cached_plan_.path.empty() || runner.cached_plan_.path.front() != s.current) {
          runner.cached_plan_ = plan(g, env.teacher_config(), env.params(), env.curve(),
                                     s.current, s.goal, s.soc_pct);
          runner.steps_since_replan_ = 0;
        }
        runner.steps_since_replan_ += 1;
        short_slots = shortlist(runner.cached_plan_, s.current, g);
        if (!g.neighbors(s.current).empty()) {
          const int slot = greedy_hint(g, s.current, s.goal);
          if (slot < kMaxNeighborSlots) hint_slot = slot;
        }
      }
      int teacher_action = -1;
      if (!short_slots.empty() && runner.cached_plan_.path.size() >= 2) {
        const auto& nbrs = g.neighbors(env.state().current);
        for (std::size_t k = 0; k < nbrs.size() && k < kMaxNeighborSlots; ++k) {
          if (nbrs[k].to == runner.cached_plan_.path[1]) {
            teacher_action = static_cast<int>(k);
            break;
          }
        }
      }
      if (teacher_action < 0) teacher_action = hint_slot;

      const bool overridden = follow_coin && teacher_action >= 0;
      const int action = overridden ? teacher_action : student_action;
      std::uint8_t g_t;
      if (overridden) {
        g_t = std::find(short_slots.begin(), short_slots.end(), action) != short_slots.end();
      } else {
        g_t = hint_slot >= 0 && action == hint_slot;
      }

      StepResult res = env.step(action);
      batch.actions[i] = action;
      batch.logp_old[i] = logps[action];
      batch.rewards[i] = res.reward.total;
      batch.values[i] = value;
      batch.dones[i] = res.done ? 1 : 0;
      batch.compliance[i] = g_t;
      batch.overridden[i] = overridden ? 1 : 0;

      runner.ep_.ret += res.reward.total;
      runner.ep_.steps += 1;
      runner.ep_compliant_ += g_t;
      runner.ep_.min_soc = std::min(runner.ep_.min_soc, res.state.soc_pct);
      if (res.info.invalid_charge) runner.ep_.invalid_charges += 1;
      if (res.info.session_completed) runner.ep_.sessions_completed += 1;
      runner.ep_.dwell_min += res.info.charge_minutes;

      if (res.done) {
        runner.ep_.outcome = res.state.done_reason;
        runner.ep_.compliance_rate =
            runner.ep_.steps > 0 ? static_cast<double>(runner.ep_compliant_) / runner.ep_.steps
                                 : 0.0;
        finished[e].push_back(runner.ep_);
        runner.reset_episode();
      } else {
        runner.obs_ = res.obs;
      }
    }
    double bootstrap = 0.0;
    net.forward(runner.obs_.v.data(), logits.data(), &bootstrap, nullptr);
    batch.bootstrap[e] = bootstrap;
  }

  for (int e = 0; e < n_envs; ++e) {
    batch.episodes.insert(batch.episodes.end(), finished[e].begin(), finished[e].end());
  }
  return batch;
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double bootstrap,
                 double gamma, double lambda, std::vector<double>& advantages,
                 std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw InvalidArgument("compute_gae: length mismatch");
  }
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t ri = 0; ri < n; ++ri) {
    const std::size_t t = n - 1 - ri;
    const double nonterminal = dones[t] ? 0.0 : 1.0;
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
    acc = delta + gamma * lambda * nonterminal * acc;
    advantages[t] = acc;
    returns[t] = acc + values[t];
  }
}

void compute_gae(RolloutBatch& batch, double gamma, double lambda,
                 double reward_scale) {
  const int n = batch.size();
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  for (int e = 0; e < batch.n_envs; ++e) {
    const std::size_t off = static_cast<std::size_t>(e) * batch.n_steps;
    double acc = 0.0;
    for (int ri = 0; ri < batch.n_steps; ++ri) {
      const std::size_t t = off + batch.n_steps - 1 - ri;
      const double nonterminal = batch.dones[t] ? 0.0 : 1.0;
      const double next_value = (ri == 0) ? batch.bootstrap[e] : batch.values[t + 1];
      const double delta = batch.rewards[t] * reward_scale +
                           gamma * next_value * nonterminal - batch.values[t];
      acc = delta + gamma * lambda * nonterminal * acc;
      batch.advantages[t] = acc;
      batch.returns[t] = acc + batch.values[t];
    }
  }
}

UpdateStats ppo_update(PolicyNet& net, Adam& adam, RolloutBatch& batch,
                       const PpoConfig& cfg, double lr, std::mt19937_64& rng,
                       ExecMode mode) {
  cfg.validate();
  const int n = batch.size();
  if (n < 1 || batch.advantages.empty()) {
    throw InvalidArgument("ppo_update: empty batch or missing advantages");
  }
  const int obs_dim = net.obs_dim();
  const int act_dim = net.act_dim();

  // Normalize advantages over the whole batch.
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / n);
  const double denom = std::max(stdev, 1e-8);
  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = (batch.advantages[i] - mean) / denom;

  const std::vector<double> snapshot = net.theta();
  UpdateStats stats;
  double sum_pl = 0.0, sum_vl = 0.0, sum_ent = 0.0, sum_kl = 0.0, sum_clip = 0.0;
  std::int64_t n_samples = 0;

  std::vector<int> perm(n);
  std::vector<double> mb_obs, mb_act_cache, mb_logits, mb_values, mb_dlogits, mb_dvalues;
  std::vector<std::uint8_t> mb_mask;
  std::vector<double> grad;
  std::array<double, 64> logps{};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform01(rng) * (i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    for (int start = 0; start < n; start += cfg.minibatch) {
      const int m = std::min(cfg.minibatch, n - start);
      mb_obs.resize(static_cast<std::size_t>(m) * obs_dim);
      mb_mask.resize(static_cast<std::size_t>(m) * act_dim);
      mb_act_cache.resize(static_cast<std::size_t>(m) * net.activation_count());
      mb_logits.resize(static_cast<std::size_t>(m) * act_dim);
      mb_values.resize(m);
      mb_dlogits.assign(static_cast<std::size_t>(m) * act_dim, 0.0);
      mb_dvalues.assign(m, 0.0);
      for (int k = 0; k < m; ++k) {
        const int src = perm[start + k];
        std::memcpy(mb_obs.data() + static_cast<std::size_t>(k) * obs_dim,
                    batch.obs.data() + static_cast<std::size_t>(src) * obs_dim,
                    sizeof(double) * obs_dim);
        std::memcpy(mb_mask.data() + static_cast<std::size_t>(k) * act_dim,
                    batch.mask.data() + static_cast<std::size_t>(src) * act_dim,
                    act_dim);
      }
      policy_forward_batch(net, mb_obs.data(), m, mb_logits.data(), mb_values.data(),
                           mb_act_cache.data(), mode);

      double mb_pl = 0.0, mb_vl = 0.0, mb_ent = 0.0, mb_kl = 0.0, mb_clip = 0.0;
      const double inv_m = 1.0 / m;
      for (int k = 0; k < m; ++k) {
        const int src = perm[start + k];
        const double* logits = mb_logits.data() + static_cast<std::size_t>(k) * act_dim;
        const std::uint8_t* mask = mb_mask.data() + static_cast<std::size_t>(k) * act_dim;
        const double entropy = masked_log_softmax(logits, mask, act_dim, logps.data());
        const int a = batch.actions[src];
        const double lp_new = logps[a];
        const double lp_old = batch.logp_old[src];
        const double ratio = std::exp(lp_new - lp_old);
        const double a_hat = adv[src];

        const double pg1 = ratio * a_hat;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double pg2 = clipped * a_hat;
        mb_pl += -std::min(pg1, pg2);
        mb_kl += lp_old - lp_new;
        if (std::abs(ratio - 1.0) > cfg.clip_eps) mb_clip += 1.0;
        mb_ent += entropy;

        // d(policy loss)/d(logp_new): active only on the unclipped branch.
        double dlp = 0.0;
        if (pg1 <= pg2) dlp = -ratio * a_hat;
        double* dl = mb_dlogits.data() + static_cast<std::size_t>(k) * act_dim;
        for (int c = 0; c < act_dim; ++c) {
          if (!mask[c]) continue;
          const double p_c = std::exp(logps[c]);
          const double indicator = c == a ? 1.0 : 0.0;
          // policy term + entropy term
          dl[c] = inv_m * (dlp * (indicator - p_c) +
                           cfg.entropy_coef * p_c * (logps[c] + entropy));
        }
        const double verr = mb_values[k] - batch.returns[src];
        mb_vl += verr * verr;
        mb_dvalues[k] = inv_m * cfg.value_coef * 2.0 * verr;
      }

      policy_backward_batch(net, mb_obs.data(), m, mb_act_cache.data(), mb_dlogits.data(),
                            mb_dvalues.data(), grad, mode);

      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      const double loss = mb_pl * inv_m + cfg.value_coef * mb_vl * inv_m -
                          cfg.entropy_coef * mb_ent * inv_m;
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        net.theta() = snapshot;
        throw NonFiniteLoss("non-finite PPO loss or gradient; weights restored");
      }
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / norm;
        for (double& g : grad) g *= scale;
      }
      adam.step(net.theta(), grad, lr);

      sum_pl += mb_pl;
      sum_vl += mb_vl;
      sum_ent += mb_ent;
      sum_kl += mb_kl;
      sum_clip += mb_clip;
      n_samples += m;
      stats.minibatches += 1;
    }
  }
  const double inv = n_samples > 0 ? 1.0 / static_cast<double>(n_samples) : 0.0;
  stats.policy_loss = sum_pl * inv;
  stats.value_loss = sum_vl * inv;
  stats.entropy = sum_ent * inv;
  stats.approx_kl = sum_kl * inv;
  stats.clip_fraction = sum_clip * inv;
  return stats;
}

void write_training_log(std::ostream& out, const std::vector<LogRow>& rows) {
  std::string buf = "stage,episode,return,success,compliance,lr,batch\n";
  for (const LogRow& r : rows) {
    buf += std::to_string(r.stage);
    buf += ',';
    buf += std::to_string(r.episode);
    buf += ',';
    append_double(buf, r.ret);
    buf += ',';
    buf += std::to_string(r.success);
    buf += ',';
    append_double(buf, r.compliance);
    buf += ',';
    append_double(buf, r.lr);
    buf += ',';
    buf += std::to_string(r.batch);
    buf += '\n';
  }
  out << buf;
}

TrainResult train(const RoadGraph& g, const VehicleParams& params,
                  const ChargeCurve& curve, const TrainConfig& cfg, std::ostream* diag) {
  cfg.validate();
  std::vector<StageConfig> stages = cfg.stages;
  if (stages.empty()) {
    for (int s = 1; s <= 6; ++s) stages.push_back({s, false, 400});
  }

  TrainResult result{PolicyNet(kObservationDim, kActionCount, cfg.ppo.hidden, cfg.ppo.seed),
                     {}, {}};
  std::mt19937_64 update_rng(split_seed(cfg.ppo.seed, 0x7070ULL, 0));
  const ExecMode mode = cfg.parallel ? ExecMode::Parallel : ExecMode::Serial;

  std::int64_t global_episode = 0;
  int usable_stages = 0;
  const int n_stage_steps = std::max<int>(1, static_cast<int>(stages.size()) - 1);

  for (std::size_t si = 0; si < stages.size(); ++si) {
    const StageConfig& st = stages[si];
    const double frac = static_cast<double>(si) / n_stage_steps;
    const double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
    const int batch_size = static_cast<int>(
        std::lround(cfg.batch_start + (cfg.batch_end - cfg.batch_start) * frac));
    const int n_steps = std::max(1, batch_size / cfg.n_envs);

    EnvConfig env_cfg = cfg.env;
    env_cfg.stage = st.stage;
    env_cfg.expanded_curriculum = st.expanded;
    env_cfg.strict_action_slots = false;

    StageSummary summary;
    summary.stage = st.stage;
    summary.expanded = st.expanded;

    PpoConfig stage_ppo = cfg.ppo;
    if (st.entropy_coef >= 0.0) stage_ppo.entropy_coef = st.entropy_coef;
    double ent_coef = stage_ppo.entropy_coef;
    const double pf_start = st.p_follow_start >= 0.0 ? st.p_follow_start : cfg.p_follow_start;
    const double pf_end = st.p_follow_end >= 0.0 ? st.p_follow_end : cfg.p_follow_end;
    const double gate_rate =
        st.gate_success_rate >= 0.0 ? st.gate_success_rate : cfg.gate_success_rate;

    // Probe goal placement before spinning up the full runner set.
    try {
      EvEnv probe(g, env_cfg, params, curve, cfg.teacher);
      probe.reset(split_seed(cfg.ppo.seed, 0xABCDULL, si));
    } catch (const NoGoalAtDistance& e) {
      if (diag) {
        *diag << "stage " << st.stage << (st.expanded ? " (expanded)" : "")
              << " skipped: " << e.what() << '\n';
      }
      summary.skipped = true;
      result.summaries.push_back(summary);
      continue;
    }
    ++usable_stages;

    std::vector<EnvRunner> runners;
    runners.reserve(cfg.n_envs);
    for (int e = 0; e < cfg.n_envs; ++e) {
      runners.emplace_back(EvEnv(g, env_cfg, params, curve, cfg.teacher),
                           split_seed(cfg.ppo.seed, si + 1, e), e);
      runners.back().reset_episode();
    }
    // The advancement gate measures the greedy student without teacher
    // overrides; guided training episodes say little about the policy.
    EvEnv gate_env(g, env_cfg, params, curve, cfg.teacher);
    // Fresh optimizer moments per stage: the gradient scales of a new
    // distance regime should not be throttled by the previous stage's.
    Adam adam(result.net.param_count());

    std::int64_t stage_episodes = 0;
    double stage_return = 0.0, stage_compliance = 0.0;
    std::int64_t stage_success = 0, stage_depleted = 0;
    bool gate_met = false;
    std::uint64_t update_counter = 0;

    while (stage_episodes < st.max_episodes && !gate_met) {
      const double progress =
          st.max_episodes > 1
              ? std::min(1.0, static_cast<double>(stage_episodes) / st.max_episodes)
              : 1.0;
      const double p_follow =
          pf_start * std::pow(pf_end / std::max(pf_start, 1e-12), progress);

      RolloutBatch batch =
          collect_rollouts(runners, result.net, stage_ppo, p_follow, n_steps, true, mode);
      compute_gae(batch, stage_ppo.gamma, stage_ppo.gae_lambda, stage_ppo.reward_scale);
      stage_ppo.entropy_coef = ent_coef;
      const UpdateStats up = ppo_update(result.net, adam, batch, stage_ppo, lr, update_rng, mode);
      if (cfg.ppo.entropy_target > 0.0) {
        // Slow multiplicative controller toward the entropy target.
        const double err = cfg.ppo.entropy_target - up.entropy;
        ent_coef = std::clamp(ent_coef * std::exp(0.3 * err),
                              cfg.ppo.entropy_coef_min, cfg.ppo.entropy_coef_max);
      }
      ++update_counter;

      for (const EpisodeStats& ep : batch.episodes) {
        const int success = ep.outcome == DoneReason::Success ? 1 : 0;
        result.rows.push_back({st.stage, global_episode, ep.ret, success,
                               ep.compliance_rate, lr, batch_size});
        ++global_episode;
        ++stage_episodes;
        stage_return += ep.ret;
        stage_compliance += ep.compliance_rate;
        stage_success += success;
        stage_depleted += ep.outcome == DoneReason::Depleted ? 1 : 0;
      }

      const EvalStats gate = evaluate(result.net, gate_env, cfg.gate_window, true,
                                      split_seed(cfg.ppo.seed, 0xEE00 + si, update_counter));
      if (diag && update_counter % 10 == 0) {
        *diag << "  [u" << update_counter << "] stage " << st.stage << " pf=" << p_follow
              << " eps=" << stage_episodes << " gate_succ=" << gate.success_rate
              << " gate_dep=" << gate.depletion_rate << '\n';
      }
      if (gate.success_rate >= gate_rate) gate_met = true;
    }

    summary.episodes = stage_episodes;
    if (stage_episodes > 0) {
      summary.success_rate = static_cast<double>(stage_success) / stage_episodes;
      summary.mean_return = stage_return / stage_episodes;
      summary.compliance_rate = stage_compliance / stage_episodes;
      summary.depletion_rate = static_cast<double>(stage_depleted) / stage_episodes;
    }
    result.summaries.push_back(summary);
    if (diag) {
      *diag << "stage " << st.stage << (st.expanded ? " (expanded)" : "") << ": episodes="
            << summary.episodes << " success=" << summary.success_rate
            << " mean_return=" << summary.mean_return
            << " compliance=" << summary.compliance_rate
            << " depletion=" << summary.depletion_rate << (gate_met ? " [gate]" : "")
            << '\n';
    }
  }

  if (usable_stages == 0) {
    throw NoGoalAtDistance("every curriculum stage was skipped; graph cannot host training");
  }
  return result;
}

EvalStats evaluate(const PolicyNet& net, EvEnv& env, int n_episodes,
                   bool deterministic, std::uint64_t seed) {
  EvalStats stats;
  if (n_episodes < 1) return stats;
  std::mt19937_64 rng(split_seed(seed, 0xE7A1ULL, 0));
  std::array<double, kActionCount> logits{};
  std::array<double, kActionCount> logps{};
  double sum_min_soc = 0.0;
  std::int64_t stops = 0;
  double dwell = 0.0;

  for (int ep = 0; ep < n_episodes; ++ep) {
    auto [state, obs] = env.reset(split_seed(seed, 1, static_cast<std::uint64_t>(ep)));
    double min_soc = state.soc_pct;
    bool done = false;
    while (!done) {
      const auto mask = env.action_mask();
      double value = 0.0;
      net.forward(obs.v.data(), logits.data(), &value, nullptr);
      masked_log_softmax(logits.data(), mask.data(), kActionCount, logps.data());
      const int action =
          deterministic ? argmax_masked(logps.data(), mask.data(), kActionCount)
                        : sample_masked(logps.data(), mask.data(), kActionCount,
                                        uniform01(rng));
      StepResult res = env.step(action);
      stats.total_actions += 1;
      if (res.info.invalid_charge) stats.invalid_charge_actions += 1;
      if (res.info.session_completed) stops += 1;
      dwell += res.info.charge_minutes;
      min_soc = std::min(min_soc, res.state.soc_pct);
      obs = res.obs;
      done = res.done;
      if (done) {
        switch (res.state.done_reason) {
          case DoneReason::Success: stats.success_rate += 1.0; break;
          case DoneReason::Depleted: stats.depletion_rate += 1.0; break;
          case DoneReason::Timeout: stats.timeout_rate += 1.0; break;
          default: break;
        }
      }
    }
    sum_min_soc += min_soc;
  }
  stats.episodes = n_episodes;
  stats.success_rate /= n_episodes;
  stats.depletion_rate /= n_episodes;
  stats.timeout_rate /= n_episodes;
  stats.mean_stops = static_cast<double>(stops) / n_episodes;
  stats.mean_dwell_min = stops > 0 ? dwell / static_cast<double>(stops) : 0.0;
  stats.mean_min_soc = sum_min_soc / n_episodes;
  return stats;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (!j.is_object()) throw ParseError("training config must be a JSON object");
  const auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    auto getp = [&](const char* k, auto& field) {
      if (p.contains(k)) field = p.at(k).get<std::decay_t<decltype(field)>>();
    };
    getp("gamma", cfg.ppo.gamma);
    getp("gae_lambda", cfg.ppo.gae_lambda);
    getp("clip_eps", cfg.ppo.clip_eps);
    getp("entropy_coef", cfg.ppo.entropy_coef);
    getp("value_coef", cfg.ppo.value_coef);
    getp("max_grad_norm", cfg.ppo.max_grad_norm);
    getp("reward_scale", cfg.ppo.reward_scale);
    getp("entropy_target", cfg.ppo.entropy_target);
    getp("entropy_coef_min", cfg.ppo.entropy_coef_min);
    getp("entropy_coef_max", cfg.ppo.entropy_coef_max);
    getp("epochs", cfg.ppo.epochs);
    getp("minibatch", cfg.ppo.minibatch);
    getp("hidden", cfg.ppo.hidden);
    getp("seed", cfg.ppo.seed);
  }
  if (j.contains("env")) {
    const auto& e = j.at("env");
    auto gete = [&](const char* k, auto& field) {
      if (e.contains(k)) field = e.at(k).get<std::decay_t<decltype(field)>>();
    };
    gete("success_radius_km", cfg.env.success_radius_km);
    gete("low_soc_pct", cfg.env.low_soc_pct);
    gete("critical_soc_pct", cfg.env.critical_soc_pct);
    gete("charge_cap_pct", cfg.env.charge_cap_pct);
    gete("initial_soc_pct", cfg.env.initial_soc_pct);
    gete("episode_budget", cfg.env.episode_budget);
    gete("charge_step_minutes", cfg.env.charge_step_minutes);
    gete("literal_delta_distance_term", cfg.env.literal_delta_distance_term);
  }
  if (j.contains("teacher")) {
    const auto& t = j.at("teacher");
    auto gett = [&](const char* k, auto& field) {
      if (t.contains(k)) field = t.at(k).get<std::decay_t<decltype(field)>>();
    };
    gett("w_t", cfg.teacher.w_t);
    gett("w_e", cfg.teacher.w_e);
    gett("w_c", cfg.teacher.w_c);
    gett("tariff_p", cfg.teacher.tariff_p);
    gett("tariff_p_min", cfg.teacher.tariff_p_min);
    gett("v_max_kmh", cfg.teacher.v_max_kmh);
    gett("n_exp", cfg.teacher.n_exp);
    gett("replan_period_tau", cfg.teacher.replan_period_tau);
    gett("soc_bucket_pct", cfg.teacher.soc_bucket_pct);
    gett("charge_cap_pct", cfg.teacher.charge_cap_pct);
  }
  get("n_envs", cfg.n_envs);
  get("lr_start", cfg.lr_start);
  get("lr_end", cfg.lr_end);
  get("batch_start", cfg.batch_start);
  get("batch_end", cfg.batch_end);
  get("p_follow_start", cfg.p_follow_start);
  get("p_follow_end", cfg.p_follow_end);
  get("gate_success_rate", cfg.gate_success_rate);
  get("gate_window", cfg.gate_window);
  get("parallel", cfg.parallel);
  if (j.contains("stages")) {
    cfg.stages.clear();
    for (const auto& s : j.at("stages")) {
      StageConfig sc;
      sc.stage = s.at("stage").get<int>();
      sc.expanded = s.value("expanded", false);
      sc.max_episodes = s.value("max_episodes", 400);
      sc.p_follow_start = s.value("p_follow_start", -1.0);
      sc.p_follow_end = s.value("p_follow_end", -1.0);
      sc.entropy_coef = s.value("entropy_coef", -1.0);
      sc.gate_success_rate = s.value("gate_success_rate", -1.0);
      cfg.stages.push_back(sc);
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["ppo"] = {{"gamma", ppo.gamma},
              {"gae_lambda", ppo.gae_lambda},
              {"clip_eps", ppo.clip_eps},
              {"entropy_coef", ppo.entropy_coef},
              {"value_coef", ppo.value_coef},
              {"max_grad_norm", ppo.max_grad_norm},
              {"reward_scale", ppo.reward_scale},
              {"entropy_target", ppo.entropy_target},
              {"entropy_coef_min", ppo.entropy_coef_min},
              {"entropy_coef_max", ppo.entropy_coef_max},
              {"epochs", ppo.epochs},
              {"minibatch", ppo.minibatch},
              {"hidden", ppo.hidden},
              {"seed", ppo.seed}};
  j["env"] = {{"success_radius_km", env.success_radius_km},
              {"low_soc_pct", env.low_soc_pct},
              {"critical_soc_pct", env.critical_soc_pct},
              {"charge_cap_pct", env.charge_cap_pct},
              {"initial_soc_pct", env.initial_soc_pct},
              {"episode_budget", env.episode_budget},
              {"charge_step_minutes", env.charge_step_minutes},
              {"literal_delta_distance_term", env.literal_delta_distance_term}};
  j["teacher"] = {{"w_t", teacher.w_t},
                  {"w_e", teacher.w_e},
                  {"w_c", teacher.w_c},
                  {"tariff_p", teacher.tariff_p},
                  {"tariff_p_min", teacher.tariff_p_min},
                  {"v_max_kmh", teacher.v_max_kmh},
                  {"n_exp", teacher.n_exp},
                  {"replan_period_tau", teacher.replan_period_tau},
                  {"soc_bucket_pct", teacher.soc_bucket_pct},
                  {"charge_cap_pct", teacher.charge_cap_pct}};
  j["n_envs"] = n_envs;
  j["lr_start"] = lr_start;
  j["lr_end"] = lr_end;
  j["batch_start"] = batch_start;
  j["batch_end"] = batch_end;
  j["p_follow_start"] = p_follow_start;
  j["p_follow_end"] = p_follow_end;
  j["gate_success_rate"] = gate_success_rate;
  j["gate_window"] = gate_window;
  j["parallel"] = parallel;
  nlohmann::json js = nlohmann::json::array();
  for (const StageConfig& s : stages) {
    js.push_back({{"stage", s.stage},
                  {"expanded", s.expanded},
                  {"max_episodes", s.max_episodes},
                  {"p_follow_start", s.p_follow_start},
                  {"p_follow_end", s.p_follow_end},
                  {"entropy_coef", s.entropy_coef},
                  {"gate_success_rate", s.gate_success_rate}});
  }
  j["stages"] = js;
  return j;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open training config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

std::string TrainConfig::config_hash() const {
  const std::string dump = to_json().dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace vega
