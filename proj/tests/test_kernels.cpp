#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "vega/kernels.hpp"

using namespace vega;

namespace {

struct KernelFixture {
  PolicyNet net{26, 9, {64, 32}, 4};
  int n = 333;  // deliberately not a multiple of the chunk size
  std::vector<double> obs, dlogits, dvalues;

  KernelFixture() {
    std::mt19937_64 rng(77);
    obs.resize(static_cast<std::size_t>(n) * net.obs_dim());
    dlogits.resize(static_cast<std::size_t>(n) * net.act_dim());
    dvalues.resize(n);
    for (double& x : obs) x = vega_test::uniform01(rng) * 2.0 - 1.0;
    for (double& x : dlogits) x = vega_test::uniform01(rng) - 0.5;
    for (double& x : dvalues) x = vega_test::uniform01(rng) - 0.5;
  }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("forward: serial, parallel and reference agree bitwise") {
  KernelFixture f;
  const std::size_t nl = static_cast<std::size_t>(f.n) * f.net.act_dim();
  const std::size_t na = static_cast<std::size_t>(f.n) * f.net.activation_count();
  std::vector<double> l1(nl), l2(nl), l3(nl), v1(f.n), v2(f.n), v3(f.n);
  std::vector<double> a1(na), a2(na), a3(na);
  policy_forward_batch(f.net, f.obs.data(), f.n, l1.data(), v1.data(), a1.data(),
                       ExecMode::Serial);
  policy_forward_batch(f.net, f.obs.data(), f.n, l2.data(), v2.data(), a2.data(),
                       ExecMode::Parallel);
  reference_policy_forward_batch(f.net, f.obs.data(), f.n, l3.data(), v3.data(),
                                 a3.data());
  CHECK(l1 == l2);
  CHECK(v1 == v2);
  CHECK(a1 == a2);
  CHECK(l1 == l3);  // per-sample work is identical arithmetic
  CHECK(v1 == v3);
}

TEST_CASE("backward: parallel equals serial bitwise, chunk order fixed") {
  KernelFixture f;
  const std::size_t na = static_cast<std::size_t>(f.n) * f.net.activation_count();
  std::vector<double> acts(na), logits(static_cast<std::size_t>(f.n) * 9), values(f.n);
  policy_forward_batch(f.net, f.obs.data(), f.n, logits.data(), values.data(),
                       acts.data(), ExecMode::Serial);
  std::vector<double> g_serial, g_parallel;
  policy_backward_batch(f.net, f.obs.data(), f.n, acts.data(), f.dlogits.data(),
                        f.dvalues.data(), g_serial, ExecMode::Serial);
  policy_backward_batch(f.net, f.obs.data(), f.n, acts.data(), f.dlogits.data(),
                        f.dvalues.data(), g_parallel, ExecMode::Parallel);
  CHECK(g_serial == g_parallel);
}

TEST_CASE("backward: chunked accumulation matches the reference closely") {
  KernelFixture f;
  const std::size_t na = static_cast<std::size_t>(f.n) * f.net.activation_count();
  std::vector<double> acts(na), logits(static_cast<std::size_t>(f.n) * 9), values(f.n);
  policy_forward_batch(f.net, f.obs.data(), f.n, logits.data(), values.data(),
                       acts.data(), ExecMode::Serial);
  std::vector<double> g_chunked, g_reference;
  policy_backward_batch(f.net, f.obs.data(), f.n, acts.data(), f.dlogits.data(),
                        f.dvalues.data(), g_chunked, ExecMode::Parallel);
  reference_policy_backward_batch(f.net, f.obs.data(), f.n, acts.data(),
                                  f.dlogits.data(), f.dvalues.data(), g_reference);
  CHECK(vega_test::max_rel_error(g_chunked, g_reference, 1e-6) < 1e-12);
}

TEST_CASE("backward gradient of a scalar head output is exact") {
  // d(value)/d(theta) via backward with dvalue = 1 must match finite
  // differences of the forward value.
  PolicyNet net(6, 3, {5}, 21);
  std::mt19937_64 rng(8);
  std::vector<double> obs(6);
  for (double& x : obs) x = vega_test::uniform01(rng) * 2.0 - 1.0;
  std::vector<double> acts(net.activation_count());
  std::vector<double> logits(3);
  double value = 0.0;
  net.forward(obs.data(), logits.data(), &value, acts.data());
  std::vector<double> grad(net.param_count(), 0.0);
  const double dlogits[3] = {0.0, 0.0, 0.0};
  net.backward(obs.data(), acts.data(), dlogits, 1.0, grad.data());

  const auto value_at = [&](const std::vector<double>& theta) {
    PolicyNet probe = net;
    probe.theta() = theta;
    double v = 0.0;
    double lg[3];
    probe.forward(obs.data(), lg, &v, nullptr);
    return v;
  };
  const auto numeric = vega_test::finite_difference(value_at, net.theta(), 1e-6);
  CHECK(vega_test::max_rel_error(grad, numeric, 1e-6) < 1e-6);
}

}  // TEST_SUITE
