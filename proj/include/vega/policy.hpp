#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace vega {

// Two independent tanh MLP towers over the same observation: one ends in
// action logits, the other in a scalar state value, so value-regression
// gradients cannot disturb the policy features. All parameters live in one
// flat vector so the optimizer, the checkpoint format and gradient checks
// can treat the network as a plain parameter array.
//
// Layout of theta: policy tower layers (each W row-major then b), the
// logits head, then the value tower layers and the value head.
class PolicyNet {
 public:
  PolicyNet(int obs_dim, int act_dim, std::vector<int> hidden, std::uint64_t seed);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  int param_count() const { return static_cast<int>(theta_.size()); }

  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }

  // Total number of hidden activations for one sample (sum of widths over
  // both towers); forward caches store this many doubles per sample.
  int activation_count() const { return activation_count_; }

  // Single-sample forward pass. `activations` may be null; when given it
  // must hold activation_count() doubles and receives the tanh outputs of
  // every trunk layer (needed by backward()).
  void forward(const double* obs, double* logits, double* value,
               double* activations = nullptr) const;

  // Single-sample reverse pass. Accumulates d(loss)/d(theta) into `grad`
  // (size param_count()) given upstream gradients on the logits and value.
  void backward(const double* obs, const double* activations,
                const double* dlogits, double dvalue, double* grad) const;

  nlohmann::json to_json() const;
  static PolicyNet from_json(const nlohmann::json& j);
  void save(const std::string& path, const std::string& config_hash) const;
  static PolicyNet load(const std::string& path, std::string* config_hash = nullptr);

 private:
  struct Layer {
    int in, out;
    int w_off, b_off;
  };
  void build_layout();

  int obs_dim_, act_dim_;
  std::vector<int> hidden_;
  std::vector<Layer> policy_trunk_, value_trunk_;
  Layer logits_head_{}, value_head_{};
  int activation_count_ = 0;
  std::vector<double> theta_;
};

// Log-softmax over the valid actions only (mask entries nonzero); invalid
// slots get probability zero and log-probability -inf (represented as a
// large negative constant). Returns the entropy of the masked distribution.
double masked_log_softmax(const double* logits, const std::uint8_t* mask, int n,
                          double* log_probs);

inline constexpr double kMaskedLogProb = -1e30;

// Draws an action index from masked softmax probabilities given a uniform
// [0,1) variate; deterministic for a given variate.
int sample_masked(const double* log_probs, const std::uint8_t* mask, int n, double u);

int argmax_masked(const double* log_probs, const std::uint8_t* mask, int n);

// First/second-moment adaptive optimizer over a flat parameter vector.
class Adam {
 public:
  Adam(int n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::vector<double>& theta, const std::vector<double>& grad, double lr);
  void reset();

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace vega
