#include <cmath>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vega/env.hpp"
#include "vega/ppo.hpp"

using namespace vega;

namespace {

const RoadGraph& corridor20() {
  static const RoadGraph g = gen_corridor(20, 25.0, 10, 100.0, 21);
  return g;
}

std::vector<EnvRunner> make_runners(int n, std::uint64_t seed, int stage = 4) {
  EnvConfig cfg;
  cfg.stage = stage;
  cfg.strict_action_slots = false;
  std::vector<EnvRunner> runners;
  for (int e = 0; e < n; ++e) {
    runners.emplace_back(
        EvEnv(corridor20(), cfg, VehicleParams{}, default_charge_curve(), TeacherConfig{}),
        seed, e);
    runners.back().reset_episode();
  }
  return runners;
}

}  // namespace

TEST_SUITE("ppo") {

TEST_CASE("masked softmax normalizes over valid actions only") {
  std::mt19937_64 rng(3);
  double logits[9], logps[9];
  std::uint8_t mask[9];
  for (int trial = 0; trial < 200; ++trial) {
    int valid = 0;
    for (int i = 0; i < 9; ++i) {
      logits[i] = vega_test::uniform01(rng) * 10.0 - 5.0;
      mask[i] = vega_test::uniform01(rng) < 0.6 ? 1 : 0;
      valid += mask[i];
    }
    if (valid == 0) {
      mask[4] = 1;
      valid = 1;
    }
    const double entropy = masked_log_softmax(logits, mask, 9, logps);
    double sum = 0.0;
    for (int i = 0; i < 9; ++i) {
      if (mask[i]) {
        sum += std::exp(logps[i]);
      } else {
        CHECK(std::exp(logps[i]) == 0.0);
      }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(entropy >= -1e-12);
    CHECK(entropy <= std::log(static_cast<double>(valid)) + 1e-9);
  }
}

TEST_CASE("gae trivial cases") {
  std::vector<double> adv, ret;
  compute_gae({3.0}, {1.25}, {1}, 99.0, 0.99, 0.95, adv, ret);
  CHECK(adv[0] == doctest::Approx(3.0 - 1.25));
  CHECK(ret[0] == doctest::Approx(adv[0] + 1.25));

  // lambda = 0 collapses to one-step TD residuals.
  const std::vector<double> r = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> v = {0.2, 0.4, -0.3, 0.1};
  const std::vector<std::uint8_t> d = {0, 0, 0, 0};
  compute_gae(r, v, d, 0.7, 0.9, 0.0, adv, ret);
  for (std::size_t t = 0; t < r.size(); ++t) {
    const double next = t + 1 < v.size() ? v[t + 1] : 0.7;
    CHECK(adv[t] == doctest::Approx(r[t] + 0.9 * next - v[t]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(compute_gae({1.0}, {1.0, 2.0}, {0}, 0.0, 0.9, 0.9, adv, ret),
                  InvalidArgument);
}

TEST_CASE("gae matches the brute-force double sum") {
  std::mt19937_64 rng(17);
  for (int fixture = 0; fixture < 100; ++fixture) {
    const int n = 3 + vega_test::uniform_int(rng, 12);
    std::vector<double> r(n), v(n);
    std::vector<std::uint8_t> d(n, 0);
    for (int t = 0; t < n; ++t) {
      r[t] = vega_test::uniform01(rng) * 4.0 - 2.0;
      v[t] = vega_test::uniform01(rng) * 2.0 - 1.0;
      d[t] = vega_test::uniform01(rng) < 0.2 ? 1 : 0;
    }
    const double bootstrap = vega_test::uniform01(rng) - 0.5;
    const double gamma = 0.9 + vega_test::uniform01(rng) * 0.099;
    const double lambda = 0.8 + vega_test::uniform01(rng) * 0.2;
    std::vector<double> adv, ret, want;
    compute_gae(r, v, d, bootstrap, gamma, lambda, adv, ret);
    vega_test::brute_force_gae(r, v, d, bootstrap, gamma, lambda, want);
    for (int t = 0; t < n; ++t) {
      CHECK(std::abs(adv[t] - want[t]) < 1e-10);
      CHECK(ret[t] == adv[t] + v[t]);
    }
  }
}

TEST_CASE("rollouts: p_follow bounds override behavior") {
  PolicyNet net(kObservationDim, kActionCount, {32}, 5);
  PpoConfig cfg;

  auto runners0 = make_runners(2, 900);
  const RolloutBatch none = collect_rollouts(runners0, net, cfg, 0.0, 40, true,
                                             ExecMode::Serial);
  for (auto o : none.overridden) CHECK(o == 0);

  auto runners1 = make_runners(2, 900);
  const RolloutBatch all = collect_rollouts(runners1, net, cfg, 1.0, 40, true,
                                            ExecMode::Serial);
  int overridden = 0, compliant = 0;
  for (int i = 0; i < all.size(); ++i) {
    overridden += all.overridden[i];
    compliant += all.compliance[i];
  }
  CHECK(overridden == all.size());
  CHECK(compliant == all.size());  // teacher plans are feasible on this corridor
}

TEST_CASE("rollouts are bitwise reproducible per seed") {
  PolicyNet net(kObservationDim, kActionCount, {32}, 5);
  PpoConfig cfg;
  auto a = make_runners(3, 41);
  auto b = make_runners(3, 41);
  const RolloutBatch x = collect_rollouts(a, net, cfg, 0.4, 50, true, ExecMode::Parallel);
  const RolloutBatch y = collect_rollouts(b, net, cfg, 0.4, 50, true, ExecMode::Serial);
  CHECK(x.obs == y.obs);
  CHECK(x.actions == y.actions);
  CHECK(x.logp_old == y.logp_old);
  CHECK(x.rewards == y.rewards);
  CHECK(x.values == y.values);
  CHECK(x.dones == y.dones);
  CHECK(x.bootstrap == y.bootstrap);
  CHECK(x.overridden == y.overridden);
}

TEST_CASE("teacher isolation: with p_follow=0 the teacher never leaks in") {
  PpoConfig cfg;
  cfg.minibatch = 64;
  cfg.epochs = 2;

  auto run = [&](bool teacher_enabled) {
    PolicyNet net(kObservationDim, kActionCount, {32}, 5);
    Adam adam(net.param_count());
    std::mt19937_64 rng(split_seed(cfg.seed, 1, 2));
    auto runners = make_runners(2, 4242);
    RolloutBatch batch =
        collect_rollouts(runners, net, cfg, 0.0, 64, teacher_enabled, ExecMode::Serial);
    compute_gae(batch, cfg.gamma, cfg.gae_lambda);
    ppo_update(net, adam, batch, cfg, 3e-4, rng, ExecMode::Serial);
    return std::make_pair(batch.actions, net.theta());
  };
  const auto [actions_with, theta_with] = run(true);
  const auto [actions_without, theta_without] = run(false);
  CHECK(actions_with == actions_without);
  CHECK(theta_with == theta_without);
}

TEST_CASE("update with identical policies has zero-mean surrogate and no clipping") {
  PolicyNet net(kObservationDim, kActionCount, {16}, 8);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 1 << 20;  // single minibatch
  auto runners = make_runners(2, 77);
  RolloutBatch batch = collect_rollouts(runners, net, cfg, 0.0, 64, true, ExecMode::Serial);
  compute_gae(batch, cfg.gamma, cfg.gae_lambda);
  Adam adam(net.param_count());
  std::mt19937_64 rng(1);
  const UpdateStats stats = ppo_update(net, adam, batch, cfg, 1e-4, rng, ExecMode::Serial);
  CHECK(std::abs(stats.policy_loss) < 1e-12);
  CHECK(stats.clip_fraction == 0.0);
  CHECK(std::abs(stats.approx_kl) < 1e-12);
}

TEST_CASE("update with all-zero advantages moves only value and entropy") {
  PolicyNet net(kObservationDim, kActionCount, {16}, 8);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 1 << 20;
  auto runners = make_runners(2, 78);
  RolloutBatch batch = collect_rollouts(runners, net, cfg, 0.0, 32, true, ExecMode::Serial);
  batch.advantages.assign(batch.size(), 0.0);
  batch.returns = batch.values;
  Adam adam(net.param_count());
  std::mt19937_64 rng(1);
  const UpdateStats stats = ppo_update(net, adam, batch, cfg, 1e-4, rng, ExecMode::Serial);
  CHECK(stats.policy_loss == 0.0);
}

TEST_CASE("loss gradient matches central finite differences on a toy net") {
  PolicyNet net(26, 9, {8}, 12);
  PpoConfig cfg;
  const vega_test::ToyBatch batch = vega_test::make_toy_batch(net, 24, 99);
  const std::vector<double> analytic = vega_test::toy_grad(net, batch, cfg);
  const auto loss_at = [&](const std::vector<double>& theta) {
    PolicyNet probe = net;
    probe.theta() = theta;
    return vega_test::toy_loss(probe, batch, cfg);
  };
  const std::vector<double> numeric =
      vega_test::finite_difference(loss_at, net.theta(), 1e-6);
  CHECK(vega_test::max_rel_error(analytic, numeric, 1e-6) < 1e-4);
}

TEST_CASE("non-finite losses abort and restore weights") {
  PolicyNet net(kObservationDim, kActionCount, {16}, 8);
  PpoConfig cfg;
  auto runners = make_runners(1, 79);
  RolloutBatch batch = collect_rollouts(runners, net, cfg, 0.0, 32, true, ExecMode::Serial);
  compute_gae(batch, cfg.gamma, cfg.gae_lambda);
  batch.logp_old[3] = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> before = net.theta();
  Adam adam(net.param_count());
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(ppo_update(net, adam, batch, cfg, 1e-4, rng, ExecMode::Serial),
                  NonFiniteLoss);
  CHECK(net.theta() == before);
}

TEST_CASE("evaluate: determinism and the random-policy floor on one-hop goals") {
  EnvConfig cfg;
  cfg.stage = 2;  // 25 km: exactly one hop on this corridor
  cfg.strict_action_slots = false;
  EvEnv env(corridor20(), cfg, VehicleParams{}, default_charge_curve(), TeacherConfig{});
  PolicyNet net(kObservationDim, kActionCount, {16}, 3);

  const EvalStats a = evaluate(net, env, 50, true, 5);
  const EvalStats b = evaluate(net, env, 50, true, 5);
  CHECK(a.success_rate == b.success_rate);
  CHECK(a.total_actions == b.total_actions);

  const EvalStats sampled = evaluate(net, env, 1000, false, 6);
  // One of at most nine sampled actions per step reaches the goal; several
  // steps per episode make the true rate much higher than the 1/9 floor
  // minus three binomial sigmas.
  CHECK(sampled.success_rate >= 1.0 / 9.0 - 3.0 * std::sqrt(0.111 * 0.889 / 1000.0));
}

TEST_CASE("policy checkpoints round trip") {
  PolicyNet net(kObservationDim, kActionCount, {24, 12}, 9);
  const auto path = std::string("/tmp/vega_ckpt_test.json");
  net.save(path, "cfg123");
  std::string hash;
  const PolicyNet loaded = PolicyNet::load(path, &hash);
  CHECK(hash == "cfg123");
  CHECK(loaded.theta() == net.theta());
  CHECK(loaded.hidden() == net.hidden());
  std::remove(path.c_str());
}

TEST_CASE("training log serialization is stable") {
  std::vector<LogRow> rows = {{2, 0, -12.5, 1, 0.75, 3e-4, 2048},
                              {2, 1, 88.0, 0, 0.5, 3e-4, 2048}};
  std::ostringstream a, b;
  write_training_log(a, rows);
  write_training_log(b, rows);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 49) ==
        "stage,episode,return,success,compliance,lr,batch\n");
}

}  // TEST_SUITE
