#include "vega/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <random>

#include "vega/errors.hpp"

namespace vega {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

PolicyNet::PolicyNet(int obs_dim, int act_dim, std::vector<int> hidden, std::uint64_t seed)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(std::move(hidden)) {
  if (obs_dim_ < 1 || act_dim_ < 1) throw InvalidArgument("network dims must be positive");
  if (obs_dim_ > 512 || act_dim_ > 512) throw InvalidArgument("network dims capped at 512");
  if (hidden_.size() > 16) throw InvalidArgument("at most 16 hidden layers");
  for (int h : hidden_) {
    if (h < 1 || h > 512) throw InvalidArgument("hidden widths must be in 1..512");
  }
  build_layout();
  // Scaled-uniform init, symmetric around zero.
  std::mt19937_64 rng(seed);
  auto init_layer = [&](const Layer& l, double gain) {
    const double bound = gain * std::sqrt(6.0 / (l.in + l.out));
    for (int i = 0; i < l.in * l.out; ++i) {
      theta_[l.w_off + i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
    for (int i = 0; i < l.out; ++i) theta_[l.b_off + i] = 0.0;
  };
  for (const Layer& l : policy_trunk_) init_layer(l, 1.0);
  init_layer(logits_head_, 0.1);  // near-uniform initial policy
  for (const Layer& l : value_trunk_) init_layer(l, 1.0);
  init_layer(value_head_, 1.0);
}

void PolicyNet::build_layout() {
  // Two independent towers: value-regression gradients never touch the
  // feature layers the policy relies on.
  policy_trunk_.clear();
  value_trunk_.clear();
  activation_count_ = 0;
  int off = 0;
  const auto add_tower = [&](std::vector<Layer>& trunk, int head_out, Layer& head) {
    int in = obs_dim_;
    for (int width : hidden_) {
      Layer l{in, width, off, off + in * width};
      off = l.b_off + width;
      trunk.push_back(l);
      activation_count_ += width;
      in = width;
    }
    head = {in, head_out, off, off + in * head_out};
    off = head.b_off + head_out;
  };
  add_tower(policy_trunk_, act_dim_, logits_head_);
  add_tower(value_trunk_, 1, value_head_);
  theta_.assign(off, 0.0);
}

void PolicyNet::forward(const double* obs, double* logits, double* value,
                        double* activations) const {
  std::array<double, 512> buf_a, buf_b;
  double* act_out = activations;
  const auto run_tower = [&](const std::vector<Layer>& trunk, const Layer& head,
                             double* out) {
    const double* x = obs;
    double* cur = buf_a.data();
    double* nxt = buf_b.data();
    for (const Layer& l : trunk) {
      for (int o = 0; o < l.out; ++o) {
        const double* w = theta_.data() + l.w_off + static_cast<std::ptrdiff_t>(o) * l.in;
        double acc = theta_[l.b_off + o];
        for (int i = 0; i < l.in; ++i) acc += w[i] * x[i];
        cur[o] = std::tanh(acc);
      }
      if (act_out) {
        std::copy(cur, cur + l.out, act_out);
        act_out += l.out;
      }
      x = cur;
      std::swap(cur, nxt);
    }
    for (int o = 0; o < head.out; ++o) {
      const double* w = theta_.data() + head.w_off + static_cast<std::ptrdiff_t>(o) * head.in;
      double acc = theta_[head.b_off + o];
      for (int i = 0; i < head.in; ++i) acc += w[i] * x[i];
      out[o] = acc;
    }
  };
  run_tower(policy_trunk_, logits_head_, logits);
  run_tower(value_trunk_, value_head_, value);
}

void PolicyNet::backward(const double* obs, const double* activations,
                         const double* dlogits, double dvalue, double* grad) const {
  std::array<double, 512> dh_buf, dz_buf;
  const auto back_tower = [&](const std::vector<Layer>& trunk, const Layer& head,
                              const double* head_grad, const double* acts) {
    // Hidden activations per layer, as laid out by forward().
    std::array<const double*, 16> h{};
    {
      const double* p = acts;
      for (std::size_t l = 0; l < trunk.size(); ++l) {
        h[l] = p;
        p += trunk[l].out;
      }
    }
    const int n_last = trunk.empty() ? obs_dim_ : trunk.back().out;
    const double* last = trunk.empty() ? obs : h[trunk.size() - 1];

    double* dh = dh_buf.data();
    std::fill(dh, dh + n_last, 0.0);
    for (int o = 0; o < head.out; ++o) {
      const double g = head_grad[o];
      if (g == 0.0) continue;
      double* gw = grad + head.w_off + static_cast<std::ptrdiff_t>(o) * head.in;
      const double* w = theta_.data() + head.w_off + static_cast<std::ptrdiff_t>(o) * head.in;
      for (int i = 0; i < head.in; ++i) {
        gw[i] += g * last[i];
        dh[i] += g * w[i];
      }
      grad[head.b_off + o] += g;
    }

    double* dz = dz_buf.data();
    for (int l = static_cast<int>(trunk.size()) - 1; l >= 0; --l) {
      const Layer& layer = trunk[l];
      const double* hl = h[l];
      const double* below = l == 0 ? obs : h[l - 1];
      for (int o = 0; o < layer.out; ++o) {
        dz[o] = dh[o] * (1.0 - hl[o] * hl[o]);
      }
      std::fill(dh, dh + layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double g = dz[o];
        if (g == 0.0) continue;
        double* gw = grad + layer.w_off + static_cast<std::ptrdiff_t>(o) * layer.in;
        const double* w =
            theta_.data() + layer.w_off + static_cast<std::ptrdiff_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) {
          gw[i] += g * below[i];
          dh[i] += g * w[i];
        }
        grad[layer.b_off + o] += g;
      }
    }
  };

  int policy_acts = 0;
  for (const Layer& l : policy_trunk_) policy_acts += l.out;
  back_tower(policy_trunk_, logits_head_, dlogits, activations);
  back_tower(value_trunk_, value_head_, &dvalue, activations + policy_acts);
}

nlohmann::json PolicyNet::to_json() const {
  return nlohmann::json{{"format", "vega-policy-v1"},
                        {"obs_dim", obs_dim_},
                        {"act_dim", act_dim_},
                        {"hidden", hidden_},
                        {"theta", theta_}};
}

PolicyNet PolicyNet::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "vega-policy-v1") {
    throw ParseError("not a vega-policy-v1 checkpoint");
  }
  PolicyNet net(j.at("obs_dim").get<int>(), j.at("act_dim").get<int>(),
                j.at("hidden").get<std::vector<int>>(), 0);
  auto theta = j.at("theta").get<std::vector<double>>();
  if (static_cast<int>(theta.size()) != net.param_count()) {
    throw ParseError("checkpoint parameter count mismatch");
  }
  net.theta_ = std::move(theta);
  for (double w : net.theta_) {
    if (!std::isfinite(w)) throw ParseError("checkpoint contains non-finite weights");
  }
  return net;
}

void PolicyNet::save(const std::string& path, const std::string& config_hash) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  nlohmann::json j = to_json();
  j["config_hash"] = config_hash;
  out << j.dump() << '\n';
}

PolicyNet PolicyNet::load(const std::string& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (config_hash) *config_hash = j.value("config_hash", "");
  return from_json(j);
}

double masked_log_softmax(const double* logits, const std::uint8_t* mask, int n,
                          double* log_probs) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (mask[i]) max_logit = std::max(max_logit, logits[i]);
  }
  if (!std::isfinite(max_logit)) {
    throw InvalidArgument("masked_log_softmax: no valid action");
  }
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    if (mask[i]) z += std::exp(logits[i] - max_logit);
  }
  const double log_z = std::log(z) + max_logit;
  double entropy = 0.0;
  for (int i = 0; i < n; ++i) {
    if (mask[i]) {
      log_probs[i] = logits[i] - log_z;
      entropy -= std::exp(log_probs[i]) * log_probs[i];
    } else {
      log_probs[i] = kMaskedLogProb;
    }
  }
  return entropy;
}

int sample_masked(const double* log_probs, const std::uint8_t* mask, int n, double u) {
  double acc = 0.0;
  int last_valid = -1;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    last_valid = i;
    acc += std::exp(log_probs[i]);
    if (u < acc) return i;
  }
  if (last_valid < 0) throw InvalidArgument("sample_masked: no valid action");
  return last_valid;  // u landed in fp slack at the top of the cdf
}

int argmax_masked(const double* log_probs, const std::uint8_t* mask, int n) {
  int best = -1;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (mask[i] && log_probs[i] > best_lp) {
      best_lp = log_probs[i];
      best = i;
    }
  }
  if (best < 0) throw InvalidArgument("argmax_masked: no valid action");
  return best;
}

Adam::Adam(int n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  t_ = 0;
}

void Adam::step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
  if (theta.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidArgument("Adam: size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace vega
