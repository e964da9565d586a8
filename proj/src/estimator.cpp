#include "vega/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "vega/errors.hpp"
#include "vega/policy.hpp"  // Adam

namespace vega {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gauss(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct RawLayout {
  int n_windows;
  int core() const { return 4 + 2 * n_windows; }
  int eta_off() const { return 4; }
  int mu_off() const { return 4 + n_windows; }
};

EstimatorParams map_params(const std::vector<double>& raw, const EstimatorConfig& cfg,
                           const RawLayout& lay) {
  auto box = [](double x, const ParamBox& b) { return b.lo + (b.hi - b.lo) * sigmoid(x); };
  EstimatorParams p;
  p.c_d = box(raw[0], cfg.box_c_d);
  p.c_rr = box(raw[1], cfg.box_c_rr);
  p.mass_kg = box(raw[2], cfg.box_mass);
  p.p_aux_w = box(raw[3], cfg.box_p_aux);
  p.eta_track.resize(lay.n_windows);
  p.mu_track.resize(lay.n_windows);
  for (int w = 0; w < lay.n_windows; ++w) {
    p.eta_track[w] = box(raw[lay.eta_off() + w], cfg.box_eta);
    p.mu_track[w] = box(raw[lay.mu_off() + w], cfg.box_mu);
  }
  return p;
}

int window_of(std::size_t t, std::size_t n, int n_windows) {
  return static_cast<int>(t * static_cast<std::size_t>(n_windows) / n);
}

// Model power and its partials with respect to the physical parameters.
struct ModelEval {
  double p_model;
  double d_cd, d_crr, d_mass, d_paux, d_eta, d_mu;
};

ModelEval eval_model(double v, double a, const EstimatorParams& p, int w,
                     const EstimatorConfig& cfg) {
  const double c_aero = 0.5 * cfg.air_density * cfg.frontal_area_m2;
  const double eta = p.eta_track[w];
  const double mu = p.mu_track[w];
  const double regen = a < 0.0 ? 1.0 : 0.0;
  const double kappa = 1.0 / eta - mu * regen;
  const double aero = c_aero * p.c_d * v * v * v;
  const double roll = p.c_rr * p.mass_kg * cfg.g * v;
  const double inertial = p.mass_kg * a * v;
  const double pm = aero + roll + inertial;
  ModelEval e;
  e.p_model = kappa * pm + p.p_aux_w;
  e.d_cd = kappa * c_aero * v * v * v;
  e.d_crr = kappa * p.mass_kg * cfg.g * v;
  e.d_mass = kappa * (p.c_rr * cfg.g * v + a * v);
  e.d_paux = 1.0;
  e.d_eta = -pm / (eta * eta);
  e.d_mu = -pm * regen;
  return e;
}

LossBreakdown loss_and_grad(const std::vector<double>& raw,
                            const std::vector<double>& residual, const DriveLog& log,
                            const EstimatorConfig& cfg, const RawLayout& lay,
                            std::vector<double>* grad_raw,
                            std::vector<double>* grad_residual) {
  if (static_cast<int>(raw.size()) != lay.core()) {
    throw InvalidArgument("raw parameter vector must have 4 + 2*n_windows entries");
  }
  if (!residual.empty() && residual.size() != log.size()) {
    throw InvalidArgument("residual head length mismatch");
  }
  if (grad_raw) grad_raw->resize(lay.core());
  if (grad_residual) grad_residual->resize(log.size());
  const std::size_t n = log.size();
  const EstimatorParams p = map_params(raw, cfg, lay);
  auto dbox = [](double x, const ParamBox& b) {
    const double s = sigmoid(x);
    return (b.hi - b.lo) * s * (1.0 - s);
  };
  const double dmap[4] = {dbox(raw[0], cfg.box_c_d), dbox(raw[1], cfg.box_c_rr),
                          dbox(raw[2], cfg.box_mass), dbox(raw[3], cfg.box_p_aux)};

  if (grad_raw) std::fill(grad_raw->begin(), grad_raw->end(), 0.0);
  if (grad_residual) std::fill(grad_residual->begin(), grad_residual->end(), 0.0);

  LossBreakdown out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const int w = window_of(t, n, lay.n_windows);
    const ModelEval m = eval_model(log.v_mps[t], log.a_mps2[t], p, w, cfg);
    const double r = residual.empty() ? 0.0 : residual[t];
    const double e = log.p_bat_w[t] - m.p_model - r;
    out.data += e * e * inv_n;
    out.buffer += cfg.lambda_buff * r * r * inv_n;
    if (grad_raw) {
      const double scale = -2.0 * e * inv_n;
      (*grad_raw)[0] += scale * m.d_cd * dmap[0];
      (*grad_raw)[1] += scale * m.d_crr * dmap[1];
      (*grad_raw)[2] += scale * m.d_mass * dmap[2];
      (*grad_raw)[3] += scale * m.d_paux * dmap[3];
      (*grad_raw)[lay.eta_off() + w] +=
          scale * m.d_eta * dbox(raw[lay.eta_off() + w], cfg.box_eta);
      (*grad_raw)[lay.mu_off() + w] +=
          scale * m.d_mu * dbox(raw[lay.mu_off() + w], cfg.box_mu);
    }
    if (grad_residual && !residual.empty()) {
      (*grad_residual)[t] = -2.0 * e * inv_n + cfg.lambda_buff * 2.0 * r * inv_n;
    }
  }

  if (lay.n_windows > 1) {
    const double inv_dw = 1.0 / static_cast<double>(lay.n_windows - 1);
    for (int w = 1; w < lay.n_windows; ++w) {
      const double de = p.eta_track[w] - p.eta_track[w - 1];
      const double dm = p.mu_track[w] - p.mu_track[w - 1];
      out.smoothness += cfg.lambda_smooth * (de * de + dm * dm) * inv_dw;
      if (grad_raw) {
        const double ce = cfg.lambda_smooth * 2.0 * de * inv_dw;
        const double cm = cfg.lambda_smooth * 2.0 * dm * inv_dw;
        (*grad_raw)[lay.eta_off() + w] += ce * dbox(raw[lay.eta_off() + w], cfg.box_eta);
        (*grad_raw)[lay.eta_off() + w - 1] -=
            ce * dbox(raw[lay.eta_off() + w - 1], cfg.box_eta);
        (*grad_raw)[lay.mu_off() + w] += cm * dbox(raw[lay.mu_off() + w], cfg.box_mu);
        (*grad_raw)[lay.mu_off() + w - 1] -=
            cm * dbox(raw[lay.mu_off() + w - 1], cfg.box_mu);
      }
    }
  }

  for (int k = 0; k < lay.core(); ++k) {
    out.prior += cfg.lambda_param * raw[k] * raw[k];
    if (grad_raw) (*grad_raw)[k] += cfg.lambda_param * 2.0 * raw[k];
  }
  return out;
}

}  // namespace

void DriveLog::validate() const {
  const std::size_t n = t_s.size();
  if (n < 2 || v_mps.size() != n || a_mps2.size() != n) {
    throw InvalidArgument("drive log needs aligned t/v/a arrays with >= 2 samples");
  }
  if (!p_bat_w.empty() && p_bat_w.size() != n) {
    throw InvalidArgument("drive log power channel length mismatch");
  }
  const double dt = t_s[1] - t_s[0];
  if (!(dt > 0.0)) throw InvalidArgument("drive log timestamps must increase");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v_mps[i]) || v_mps[i] < 0.0) {
      throw InvalidArgument("drive log speeds must be finite and nonnegative");
    }
    if (i > 0 && std::abs((t_s[i] - t_s[i - 1]) - dt) > 1e-6) {
      throw InvalidArgument("drive log must be uniformly sampled (1e-6 s)");
    }
  }
}

std::vector<double> derive_accel(const std::vector<double>& v_mps, double dt_s) {
  const std::size_t n = v_mps.size();
  if (n < 2 || !(dt_s > 0.0)) throw InvalidArgument("derive_accel: bad input");
  std::vector<double> a(n);
  a[0] = (v_mps[1] - v_mps[0]) / dt_s;
  a[n - 1] = (v_mps[n - 1] - v_mps[n - 2]) / dt_s;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i] = (v_mps[i + 1] - v_mps[i - 1]) / (2.0 * dt_s);
  }
  return a;
}

void EstimatorConfig::validate() const {
  if (lambda_buff < 0.0 || lambda_smooth < 0.0 || lambda_param < 0.0) {
    throw InvalidArgument("estimator lambdas must be >= 0");
  }
  if (iterations < 1 || patience < 1) throw InvalidArgument("iterations/patience must be >= 1");
  if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (n_windows < 1) throw InvalidArgument("n_windows must be >= 1");
  for (const ParamBox* b : {&box_c_d, &box_c_rr, &box_mass, &box_p_aux, &box_eta, &box_mu}) {
    if (!(b->lo < b->hi)) throw InvalidArgument("parameter box must have lo < hi");
  }
}

DriveLog simulate_log(const VehicleParams& params, const std::vector<double>& speed_mps,
                      double dt_s, double noise_std_w, std::uint64_t seed) {
  if (speed_mps.size() < 2) throw InvalidArgument("simulate_log: need >= 2 samples");
  if (!(dt_s > 0.0)) throw InvalidArgument("simulate_log: dt must be positive");
  if (noise_std_w < 0.0) throw InvalidArgument("simulate_log: noise std must be >= 0");
  for (double v : speed_mps) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("simulate_log: speeds must be finite and nonnegative");
    }
  }
  DriveLog log;
  const std::size_t n = speed_mps.size();
  log.t_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) log.t_s[i] = static_cast<double>(i) * dt_s;
  log.v_mps = speed_mps;
  log.a_mps2 = derive_accel(speed_mps, dt_s);
  log.p_bat_w.resize(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double noise = noise_std_w > 0.0 ? noise_std_w * gauss(rng) : 0.0;
    log.p_bat_w[i] = battery_power_w(log.v_mps[i], log.a_mps2[i], params) + noise;
  }
  return log;
}

LossBreakdown hybrid_loss(const EstimatorParams& params,
                          const std::vector<double>& residual_head, const DriveLog& log,
                          const EstimatorConfig& cfg) {
  cfg.validate();
  log.validate();
  if (!log.has_power()) {
    throw MissingPowerChannel("hybrid loss needs the battery power channel");
  }
  if (params.eta_track.empty() || params.eta_track.size() != params.mu_track.size()) {
    throw InvalidArgument("eta/mu tracks must be nonempty and aligned");
  }
  if (!residual_head.empty() && residual_head.size() != log.size()) {
    throw InvalidArgument("residual head length mismatch");
  }
  const int n_windows = static_cast<int>(params.eta_track.size());
  const std::size_t n = log.size();
  LossBreakdown out;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double c_aero = 0.5 * cfg.air_density * cfg.frontal_area_m2;
  for (std::size_t t = 0; t < n; ++t) {
    const int w = window_of(t, n, n_windows);
    const double v = log.v_mps[t], a = log.a_mps2[t];
    const double kappa = 1.0 / params.eta_track[w] - params.mu_track[w] * (a < 0.0 ? 1.0 : 0.0);
    const double pm = c_aero * params.c_d * v * v * v +
                      params.c_rr * params.mass_kg * cfg.g * v + params.mass_kg * a * v;
    const double r = residual_head.empty() ? 0.0 : residual_head[t];
    const double e = log.p_bat_w[t] - (kappa * pm + params.p_aux_w) - r;
    out.data += e * e * inv_n;
    out.buffer += cfg.lambda_buff * r * r * inv_n;
  }
  if (n_windows > 1) {
    const double inv_dw = 1.0 / static_cast<double>(n_windows - 1);
    for (int w = 1; w < n_windows; ++w) {
      const double de = params.eta_track[w] - params.eta_track[w - 1];
      const double dm = params.mu_track[w] - params.mu_track[w - 1];
      out.smoothness += cfg.lambda_smooth * (de * de + dm * dm) * inv_dw;
    }
  }
  // Prior over the unconstrained coordinates, recovered through the inverse
  // box mapping (clamped away from the box edges).
  auto inv_box = [](double x, const ParamBox& b) {
    const double u = std::clamp((x - b.lo) / (b.hi - b.lo), 1e-9, 1.0 - 1e-9);
    return std::log(u / (1.0 - u));
  };
  double prior = 0.0;
  auto add = [&prior](double r) { prior += r * r; };
  add(inv_box(params.c_d, cfg.box_c_d));
  add(inv_box(params.c_rr, cfg.box_c_rr));
  add(inv_box(params.mass_kg, cfg.box_mass));
  add(inv_box(params.p_aux_w, cfg.box_p_aux));
  for (double e : params.eta_track) add(inv_box(e, cfg.box_eta));
  for (double m : params.mu_track) add(inv_box(m, cfg.box_mu));
  out.prior = cfg.lambda_param * prior;
  return out;
}

EstimateResult estimate(const DriveLog& input, const EstimatorConfig& cfg) {
  cfg.validate();
  DriveLog log = input;
  if (log.a_mps2.empty() && log.size() >= 2) {
    log.a_mps2 = derive_accel(log.v_mps, log.t_s.size() > 1 ? log.t_s[1] - log.t_s[0] : 0.0);
  }
  log.validate();
  if (!log.has_power()) {
    throw MissingPowerChannel("estimate needs the battery power channel");
  }
  if (log.size() < 256) {
    throw InsufficientData("estimate needs at least 256 samples");
  }
  double mean_v = 0.0;
  for (double v : log.v_mps) mean_v += v;
  mean_v /= static_cast<double>(log.size());
  double var_v = 0.0;
  for (double v : log.v_mps) var_v += (v - mean_v) * (v - mean_v);
  var_v /= static_cast<double>(log.size());
  if (var_v < cfg.min_speed_variance) {
    throw InsufficientExcitation("speed variance " + std::to_string(var_v) +
                                 " below gate " + std::to_string(cfg.min_speed_variance));
  }

  const RawLayout lay{cfg.n_windows};
  const std::size_t n = log.size();
  std::vector<double> theta(lay.core() + n, 0.0);  // raw params then residual head
  std::vector<double> grad(theta.size(), 0.0);
  std::vector<double> grad_raw(lay.core(), 0.0);
  std::vector<double> grad_res(n, 0.0);
  std::vector<double> raw(lay.core(), 0.0);
  std::vector<double> residual(n, 0.0);
  Adam adam(static_cast<int>(theta.size()));

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_theta = theta;
  int since_improvement = 0;
  int iters = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    iters = it + 1;
    std::copy(theta.begin(), theta.begin() + lay.core(), raw.begin());
    std::copy(theta.begin() + lay.core(), theta.end(), residual.begin());
    const LossBreakdown lb = loss_and_grad(raw, residual, log, cfg, lay, &grad_raw, &grad_res);
    const double total = lb.total();
    if (!std::isfinite(total)) {
      throw NonFiniteLoss("estimator loss diverged at iteration " + std::to_string(it));
    }
    if (total < best_loss * (1.0 - cfg.tolerance)) {
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (total < best_loss) {
      best_loss = total;
      best_theta = theta;
    }
    if (since_improvement >= cfg.patience) break;
    std::copy(grad_raw.begin(), grad_raw.end(), grad.begin());
    std::copy(grad_res.begin(), grad_res.end(), grad.begin() + lay.core());
    adam.step(theta, grad, cfg.learning_rate);
  }

  std::copy(best_theta.begin(), best_theta.begin() + lay.core(), raw.begin());
  std::copy(best_theta.begin() + lay.core(), best_theta.end(), residual.begin());
  const LossBreakdown lb = loss_and_grad(raw, residual, log, cfg, lay, nullptr, nullptr);
  const EstimatorParams fitted = map_params(raw, cfg, lay);

  EstimateResult result;
  result.params.c_d = fitted.c_d;
  result.params.c_rr = fitted.c_rr;
  result.params.mass_kg = fitted.mass_kg;
  result.params.p_aux_w = std::max(fitted.p_aux_w, 1e-9);
  result.params.eta = fitted.eta_track[0];
  result.params.mu = fitted.mu_track[0];
  result.params.frontal_area_m2 = cfg.frontal_area_m2;
  result.params.air_density = cfg.air_density;
  result.params.g = cfg.g;
  result.params.battery_kwh = cfg.battery_kwh;
  result.loss = lb;
  result.converged = since_improvement >= cfg.patience;
  result.iterations_run = iters;

  double ss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const int w = window_of(t, n, lay.n_windows);
    const ModelEval m = eval_model(log.v_mps[t], log.a_mps2[t], fitted, w, cfg);
    const double e = log.p_bat_w[t] - m.p_model;
    ss += e * e;
  }
  result.residual_rms_w = std::sqrt(ss / static_cast<double>(n));
  return result;
}

std::vector<double> infer_power(const VehicleParams& params, const DriveLog& input) {
  DriveLog log = input;
  if (log.a_mps2.empty() && log.size() >= 2) {
    log.a_mps2 = derive_accel(log.v_mps, log.t_s.size() > 1 ? log.t_s[1] - log.t_s[0] : 0.0);
  }
  log.validate();
  std::vector<double> p(log.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    p[t] = battery_power_w(log.v_mps[t], log.a_mps2[t], params);
  }
  return p;
}

double identifiability_condition(const DriveLog& log, const EstimatorParams& params,
                                 const EstimatorConfig& cfg) {
  log.validate();
  if (params.eta_track.size() != 1 || params.mu_track.size() != 1) {
    throw InvalidArgument("identifiability check expects single-window tracks");
  }
  // J columns are dP/draw at raw coordinates recovered from the box mapping.
  auto inv_box = [](double x, const ParamBox& b) {
    const double u = std::clamp((x - b.lo) / (b.hi - b.lo), 1e-9, 1.0 - 1e-9);
    return std::log(u / (1.0 - u));
  };
  const double raw[6] = {inv_box(params.c_d, cfg.box_c_d),
                         inv_box(params.c_rr, cfg.box_c_rr),
                         inv_box(params.mass_kg, cfg.box_mass),
                         inv_box(params.p_aux_w, cfg.box_p_aux),
                         inv_box(params.eta_track[0], cfg.box_eta),
                         inv_box(params.mu_track[0], cfg.box_mu)};
  auto dbox = [](double x, const ParamBox& b) {
    const double s = sigmoid(x);
    return (b.hi - b.lo) * s * (1.0 - s);
  };
  const double dmap[6] = {dbox(raw[0], cfg.box_c_d),  dbox(raw[1], cfg.box_c_rr),
                          dbox(raw[2], cfg.box_mass), dbox(raw[3], cfg.box_p_aux),
                          dbox(raw[4], cfg.box_eta),  dbox(raw[5], cfg.box_mu)};

  Eigen::Matrix<double, 6, 6> gn = Eigen::Matrix<double, 6, 6>::Zero();
  const std::size_t n = log.size();
  for (std::size_t t = 0; t < n; ++t) {
    const ModelEval m = eval_model(log.v_mps[t], log.a_mps2[t], params, 0, cfg);
    Eigen::Matrix<double, 6, 1> row;
    row << m.d_cd * dmap[0], m.d_crr * dmap[1], m.d_mass * dmap[2], m.d_paux * dmap[3],
        m.d_eta * dmap[4], m.d_mu * dmap[5];
    gn += row * row.transpose() / static_cast<double>(n);
  }
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 6; ++i) {
    d(i, i) = gn(i, i) > 0.0 ? 1.0 / std::sqrt(gn(i, i)) : 1.0;
  }
  Eigen::Matrix<double, 6, 6> eq = d * gn * d +
      cfg.lambda_param * Eigen::Matrix<double, 6, 6>::Identity();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(eq);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

LossBreakdown fit_objective(const std::vector<double>& raw,
                            const std::vector<double>& residual, const DriveLog& log,
                            const EstimatorConfig& cfg, std::vector<double>* grad_raw,
                            std::vector<double>* grad_residual) {
  cfg.validate();
  log.validate();
  if (!log.has_power()) {
    throw MissingPowerChannel("fit objective needs the battery power channel");
  }
  return loss_and_grad(raw, residual, log, cfg, RawLayout{cfg.n_windows}, grad_raw,
                       grad_residual);
}

EstimatorParams map_raw_params(const std::vector<double>& raw, const EstimatorConfig& cfg) {
  const RawLayout lay{cfg.n_windows};
  if (static_cast<int>(raw.size()) != lay.core()) {
    throw InvalidArgument("raw parameter vector must have 4 + 2*n_windows entries");
  }
  return map_params(raw, cfg, lay);
}

DriveLog DriveLog::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open drive log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::vector<std::string> cols;
  {
    std::istringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      cols.push_back(c);
    }
  }
  int ci_t = -1, ci_v = -1, ci_a = -1, ci_p = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == "t_s") ci_t = static_cast<int>(i);
    else if (cols[i] == "v_mps") ci_v = static_cast<int>(i);
    else if (cols[i] == "a_mps2") ci_a = static_cast<int>(i);
    else if (cols[i] == "p_bat_w") ci_p = static_cast<int>(i);
    else throw ParseError(path + ": unknown column '" + cols[i] + "'");
  }
  if (ci_t < 0 || ci_v < 0) {
    throw ParseError(path + ": header must include t_s and v_mps");
  }
  DriveLog log;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path + ": row " + std::to_string(row) + ": invalid number '" +
                         cell + "'");
      }
    }
    if (vals.size() != cols.size()) {
      throw ParseError(path + ": row " + std::to_string(row) + ": expected " +
                       std::to_string(cols.size()) + " columns");
    }
    log.t_s.push_back(vals[ci_t]);
    log.v_mps.push_back(vals[ci_v]);
    if (ci_a >= 0) log.a_mps2.push_back(vals[ci_a]);
    if (ci_p >= 0) log.p_bat_w.push_back(vals[ci_p]);
  }
  if (log.t_s.size() < 2) throw ParseError(path + ": need at least 2 rows");
  if (ci_a < 0) log.a_mps2 = derive_accel(log.v_mps, log.t_s[1] - log.t_s[0]);
  return log;
}

void DriveLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  std::string buf = "t_s,v_mps,a_mps2";
  if (has_power()) buf += ",p_bat_w";
  buf += '\n';
  auto append = [&buf](double v) {
    char tmp[32];
    const auto res = std::to_chars(tmp, tmp + sizeof(tmp), v);
    buf.append(tmp, res.ptr);
  };
  for (std::size_t i = 0; i < size(); ++i) {
    append(t_s[i]);
    buf += ',';
    append(v_mps[i]);
    buf += ',';
    append(a_mps2[i]);
    if (has_power()) {
      buf += ',';
      append(p_bat_w[i]);
    }
    buf += '\n';
  }
  out << buf;
}

}  // namespace vega
