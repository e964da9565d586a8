#pragma once

#include <cstdint>
#include <vector>

#include "vega/policy.hpp"

namespace vega {

// Execution policy of the batch kernels. Serial and Parallel run the same
// fixed-chunk arithmetic, so their results are bitwise identical and do not
// depend on the number of OpenMP threads.
enum class ExecMode { Serial, Parallel };

// Samples per reduction chunk. Fixed so the summation order of gradient
// accumulation is independent of thread count.
inline constexpr int kKernelChunk = 64;

// Batched forward pass: obs is n x obs_dim row-major; logits n x act_dim;
// values n. When `activations` is non-null it must hold
// n * net.activation_count() doubles.
void policy_forward_batch(const PolicyNet& net, const double* obs, int n,
                          double* logits, double* values, double* activations,
                          ExecMode mode);

// Batched reverse pass: accumulates the sum over samples of per-sample
// parameter gradients into `grad` (size net.param_count(), zeroed here).
// Per-chunk partial gradients are reduced in fixed chunk order.
void policy_backward_batch(const PolicyNet& net, const double* obs, int n,
                           const double* activations, const double* dlogits,
                           const double* dvalues, std::vector<double>& grad,
                           ExecMode mode);

// Straightforward single-loop implementations kept as the reference the
// chunked kernels are tested and benchmarked against.
void reference_policy_forward_batch(const PolicyNet& net, const double* obs, int n,
                                    double* logits, double* values,
                                    double* activations);
void reference_policy_backward_batch(const PolicyNet& net, const double* obs, int n,
                                     const double* activations, const double* dlogits,
                                     const double* dvalues, std::vector<double>& grad);

}  // namespace vega
