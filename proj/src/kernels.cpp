#include "vega/kernels.hpp"

#include <algorithm>

#include "vega/errors.hpp"

namespace vega {

void policy_forward_batch(const PolicyNet& net, const double* obs, int n,
                          double* logits, double* values, double* activations,
                          ExecMode mode) {
  const int in = net.obs_dim();
  const int out = net.act_dim();
  const int act = net.activation_count();
  const bool parallel = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (int s = 0; s < n; ++s) {
    net.forward(obs + static_cast<std::ptrdiff_t>(s) * in,
                logits + static_cast<std::ptrdiff_t>(s) * out, values + s,
                activations ? activations + static_cast<std::ptrdiff_t>(s) * act : nullptr);
  }
}

void policy_backward_batch(const PolicyNet& net, const double* obs, int n,
                           const double* activations, const double* dlogits,
                           const double* dvalues, std::vector<double>& grad,
                           ExecMode mode) {
  if (!activations) throw InvalidArgument("backward kernel needs forward activations");
  const int in = net.obs_dim();
  const int out = net.act_dim();
  const int act = net.activation_count();
  const int p = net.param_count();
  grad.assign(p, 0.0);
  const int n_chunks = (n + kKernelChunk - 1) / kKernelChunk;
  std::vector<std::vector<double>> partial(n_chunks);
  const bool parallel = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (int c = 0; c < n_chunks; ++c) {
    auto& g = partial[c];
    g.assign(p, 0.0);
    const int lo = c * kKernelChunk;
    const int hi = std::min(n, lo + kKernelChunk);
    for (int s = lo; s < hi; ++s) {
      net.backward(obs + static_cast<std::ptrdiff_t>(s) * in,
                   activations + static_cast<std::ptrdiff_t>(s) * act,
                   dlogits + static_cast<std::ptrdiff_t>(s) * out, dvalues[s], g.data());
    }
  }
  // Ordered combine: result does not depend on thread scheduling.
  for (int c = 0; c < n_chunks; ++c) {
    const auto& g = partial[c];
    for (int i = 0; i < p; ++i) grad[i] += g[i];
  }
}

void reference_policy_forward_batch(const PolicyNet& net, const double* obs, int n,
                                    double* logits, double* values,
                                    double* activations) {
  const int in = net.obs_dim();
  const int out = net.act_dim();
  const int act = net.activation_count();
  for (int s = 0; s < n; ++s) {
    net.forward(obs + static_cast<std::ptrdiff_t>(s) * in,
                logits + static_cast<std::ptrdiff_t>(s) * out, values + s,
                activations ? activations + static_cast<std::ptrdiff_t>(s) * act : nullptr);
  }
}

void reference_policy_backward_batch(const PolicyNet& net, const double* obs, int n,
                                     const double* activations, const double* dlogits,
                                     const double* dvalues, std::vector<double>& grad) {
  if (!activations) throw InvalidArgument("backward kernel needs forward activations");
  const int in = net.obs_dim();
  const int out = net.act_dim();
  const int act = net.activation_count();
  grad.assign(net.param_count(), 0.0);
  for (int s = 0; s < n; ++s) {
    net.backward(obs + static_cast<std::ptrdiff_t>(s) * in,
                 activations + static_cast<std::ptrdiff_t>(s) * act,
                 dlogits + static_cast<std::ptrdiff_t>(s) * out, dvalues[s], grad.data());
  }
}

}  // namespace vega
