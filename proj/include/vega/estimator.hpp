#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vega/energy.hpp"

namespace vega {

// Uniformly sampled speed/power log. Acceleration is derived by central
// differences (one-sided at the endpoints) when not supplied; the battery
// power channel is optional for inference-only use.
struct DriveLog {
  std::vector<double> t_s;
  std::vector<double> v_mps;
  std::vector<double> a_mps2;
  std::vector<double> p_bat_w;  // empty when absent

  double dt_s() const { return t_s.size() > 1 ? t_s[1] - t_s[0] : 0.0; }
  bool has_power() const { return !p_bat_w.empty(); }
  std::size_t size() const { return t_s.size(); }

  void validate() const;

  // CSV with header `t_s,v_mps[,a_mps2][,p_bat_w]`; column meaning is taken
  // from the header names. Throws ParseError with the offending row number.
  static DriveLog load_csv(const std::string& path);
  void save_csv(const std::string& path) const;
};

// Derives acceleration from speed by central differences.
std::vector<double> derive_accel(const std::vector<double>& v_mps, double dt_s);

struct ParamBox {
  double lo, hi;
};

struct EstimatorConfig {
  double lambda_buff = 1e-3;
  double lambda_smooth = 1e-2;
  double lambda_param = 1e-4;
  int iterations = 5000;
  double tolerance = 1e-8;   // relative best-loss improvement
  int patience = 250;        // iterations without improvement before stopping
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  int n_windows = 1;  // piecewise-constant eta/mu tracks; 1 = constant
  double min_speed_variance = 0.25;  // (m/s)^2, excitation gate

  // Physically plausible parameter boxes (estimates stay strictly inside).
  ParamBox box_c_d{0.15, 0.4};
  ParamBox box_c_rr{0.005, 0.02};
  ParamBox box_mass{1200.0, 2600.0};
  ParamBox box_p_aux{0.0, 5000.0};
  ParamBox box_eta{0.5, 1.0};
  ParamBox box_mu{0.5, 1.0};

  // Fixed (non-estimated) quantities carried into the result.
  double frontal_area_m2 = 2.22;
  double air_density = 1.225;
  double g = 9.81;
  double battery_kwh = 67.5;

  void validate() const;
};

// Free parameters of the fit: four scalars plus per-window efficiency
// tracks. Tracks have cfg.n_windows entries; timestep t belongs to window
// floor(t * W / L).
struct EstimatorParams {
  double c_d = 0.0;
  double c_rr = 0.0;
  double mass_kg = 0.0;
  double p_aux_w = 0.0;
  std::vector<double> eta_track;
  std::vector<double> mu_track;
};

struct LossBreakdown {
  double data = 0.0;
  double buffer = 0.0;
  double smoothness = 0.0;
  double prior = 0.0;
  double total() const { return data + buffer + smoothness + prior; }
};

struct EstimateResult {
  VehicleParams params;
  double residual_rms_w = 0.0;  // rms of P_data - P_model at the optimum
  LossBreakdown loss;
  bool converged = false;
  int iterations_run = 0;
};

// Synthetic log: P_data[t] = battery_power(v, a, params) + N(0, noise_std).
// Deterministic per seed.
DriveLog simulate_log(const VehicleParams& params, const std::vector<double>& speed_mps,
                      double dt_s, double noise_std_w, std::uint64_t seed);

// Hybrid fit objective:
//   data       = mean((P_data - P_model - r)^2)
//   buffer     = lambda_buff * mean(r^2)
//   smoothness = lambda_smooth * mean over first differences of the eta and
//                mu tracks (zero for single-window tracks)
//   prior      = lambda_param * ||theta_raw||^2 over the unconstrained
//                (pre-box-mapping) parameter vector
// `residual_head` has one entry per timestep (may be empty = all zero).
// Throws MissingPowerChannel when the log has no power column.
LossBreakdown hybrid_loss(const EstimatorParams& params,
                          const std::vector<double>& residual_head,
                          const DriveLog& log, const EstimatorConfig& cfg);

// Gradient-descent fit of the six physical parameters (sigmoid-remapped
// into their boxes) plus the residual head. Deterministic per seed.
// Throws InsufficientExcitation when speed variance is below the gate,
// MissingPowerChannel without a power column, NonFiniteLoss on divergence.
EstimateResult estimate(const DriveLog& log, const EstimatorConfig& cfg);

// The objective estimate() minimizes, exposed at unconstrained coordinates.
// `raw` holds [c_d, c_rr, mass, p_aux, eta_0.., mu_0..] with cfg.n_windows
// track entries each; `residual` has one entry per sample (or is empty).
// Optionally fills the analytic gradients.
LossBreakdown fit_objective(const std::vector<double>& raw,
                            const std::vector<double>& residual, const DriveLog& log,
                            const EstimatorConfig& cfg,
                            std::vector<double>* grad_raw = nullptr,
                            std::vector<double>* grad_residual = nullptr);

// Box mapping from unconstrained coordinates to physical parameters.
EstimatorParams map_raw_params(const std::vector<double>& raw,
                               const EstimatorConfig& cfg);

// Battery-power trace implied by `params` for a speed log (power channel
// not required).
std::vector<double> infer_power(const VehicleParams& params, const DriveLog& log);

// Condition number of the equilibrated Gauss-Newton matrix of the data term
// (with the prior's Tikhonov term added) at the given parameters; large
// values signal poor local identifiability.
double identifiability_condition(const DriveLog& log, const EstimatorParams& params,
                                 const EstimatorConfig& cfg);

}  // namespace vega
