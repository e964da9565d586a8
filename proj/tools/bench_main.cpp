// Benchmarks the chunked OpenMP kernels against the straightforward serial
// reference on training-shaped workloads.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "vega/kernels.hpp"
#include "vega/policy.hpp"

using namespace vega;

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  // One warmup, then best-of-reps.
  fn();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int n = 8192;
  if (argc > 1) n = std::atoi(argv[1]);
  std::printf("batch kernels, n=%d, omp_max_threads=%d\n", n, omp_get_max_threads());

  PolicyNet net(26, 9, {128, 128}, 7);
  std::mt19937_64 rng(11);
  std::vector<double> obs(static_cast<std::size_t>(n) * 26);
  for (double& x : obs) x = uniform01(rng);
  std::vector<double> logits(static_cast<std::size_t>(n) * 9);
  std::vector<double> values(n);
  std::vector<double> acts(static_cast<std::size_t>(n) * net.activation_count());
  std::vector<double> dlogits(static_cast<std::size_t>(n) * 9);
  std::vector<double> dvalues(n);
  for (double& x : dlogits) x = uniform01(rng) - 0.5;
  for (double& x : dvalues) x = uniform01(rng) - 0.5;
  std::vector<double> grad;

  const int reps = 5;
  const double fwd_ref = time_ms(
      [&] {
        reference_policy_forward_batch(net, obs.data(), n, logits.data(), values.data(),
                                       acts.data());
      },
      reps);
  const double fwd_ser = time_ms(
      [&] {
        policy_forward_batch(net, obs.data(), n, logits.data(), values.data(), acts.data(),
                             ExecMode::Serial);
      },
      reps);
  const double fwd_par = time_ms(
      [&] {
        policy_forward_batch(net, obs.data(), n, logits.data(), values.data(), acts.data(),
                             ExecMode::Parallel);
      },
      reps);
  std::printf("forward  reference %8.2f ms | serial %8.2f ms | parallel %8.2f ms | speedup %.2fx\n",
              fwd_ref, fwd_ser, fwd_par, fwd_ser / fwd_par);

  const double bwd_ref = time_ms(
      [&] {
        reference_policy_backward_batch(net, obs.data(), n, acts.data(), dlogits.data(),
                                        dvalues.data(), grad);
      },
      reps);
  const double bwd_ser = time_ms(
      [&] {
        policy_backward_batch(net, obs.data(), n, acts.data(), dlogits.data(),
                              dvalues.data(), grad, ExecMode::Serial);
      },
      reps);
  const double bwd_par = time_ms(
      [&] {
        policy_backward_batch(net, obs.data(), n, acts.data(), dlogits.data(),
                              dvalues.data(), grad, ExecMode::Parallel);
      },
      reps);
  std::printf("backward reference %8.2f ms | serial %8.2f ms | parallel %8.2f ms | speedup %.2fx\n",
              bwd_ref, bwd_ser, bwd_par, bwd_ser / bwd_par);
  return 0;
}
