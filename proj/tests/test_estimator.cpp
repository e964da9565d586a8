#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vega/errors.hpp"
#include "vega/estimator.hpp"

using namespace vega;

namespace {

DriveLog rich_log(double noise_std = 0.0, std::uint64_t seed = 1) {
  return simulate_log(VehicleParams{}, vega_test::varied_speed_profile(), 1.0,
                      noise_std, seed);
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("simulate_log basics") {
  const VehicleParams p;
  std::vector<double> idle(300, 0.0);
  const DriveLog log = simulate_log(p, idle, 1.0, 0.0, 3);
  for (double w : log.p_bat_w) CHECK(w == doctest::Approx(p.p_aux_w));

  const DriveLog a = simulate_log(p, vega_test::varied_speed_profile(), 1.0, 25.0, 7);
  const DriveLog b = simulate_log(p, vega_test::varied_speed_profile(), 1.0, 25.0, 7);
  CHECK(a.p_bat_w == b.p_bat_w);
  const DriveLog c = simulate_log(p, vega_test::varied_speed_profile(), 1.0, 25.0, 8);
  CHECK(a.p_bat_w != c.p_bat_w);

  // Noiseless trace equals the power model pointwise.
  const DriveLog clean = rich_log();
  for (std::size_t t = 0; t < clean.size(); ++t) {
    CHECK(clean.p_bat_w[t] ==
          doctest::Approx(battery_power_w(clean.v_mps[t], clean.a_mps2[t], p)));
  }
}

TEST_CASE("central-difference acceleration") {
  const std::vector<double> v = {0.0, 1.0, 4.0, 9.0, 16.0};
  const auto a = derive_accel(v, 1.0);
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == doctest::Approx(2.0));
  CHECK(a[2] == doctest::Approx(4.0));
  CHECK(a[4] == doctest::Approx(7.0));
  CHECK_THROWS_AS(derive_accel({1.0}, 1.0), InvalidArgument);
}

TEST_CASE("drive log validation") {
  DriveLog log = rich_log();
  log.t_s[5] += 0.5;
  CHECK_THROWS_AS(log.validate(), InvalidArgument);
  log = rich_log();
  log.v_mps[3] = -1.0;
  CHECK_THROWS_AS(log.validate(), InvalidArgument);
}

TEST_CASE("hybrid loss components") {
  const DriveLog log = rich_log();
  EstimatorConfig cfg;
  EstimatorParams truth;
  const VehicleParams p;
  truth.c_d = p.c_d;
  truth.c_rr = p.c_rr;
  truth.mass_kg = p.mass_kg;
  truth.p_aux_w = p.p_aux_w;
  truth.eta_track = {p.eta};
  truth.mu_track = {p.mu};

  const LossBreakdown at_truth = hybrid_loss(truth, {}, log, cfg);
  CHECK(at_truth.data < 1e-16);
  CHECK(at_truth.buffer == 0.0);
  CHECK(at_truth.smoothness == 0.0);  // constant tracks
  CHECK(at_truth.prior > 0.0);

  EstimatorConfig zero = cfg;
  zero.lambda_buff = 0.0;
  zero.lambda_smooth = 0.0;
  zero.lambda_param = 0.0;
  EstimatorParams off = truth;
  off.c_d *= 1.1;
  std::vector<double> residual(log.size(), 5.0);
  const LossBreakdown lb = hybrid_loss(off, residual, log, zero);
  CHECK(lb.total() == lb.data);

  // Piecewise tracks exercise the smoothness term.
  EstimatorConfig windowed = cfg;
  windowed.n_windows = 4;
  EstimatorParams tracked = truth;
  tracked.eta_track = {0.8, 0.82, 0.84, 0.86};
  tracked.mu_track = {0.7, 0.7, 0.7, 0.7};
  const LossBreakdown sm = hybrid_loss(tracked, {}, log, windowed);
  CHECK(sm.smoothness ==
        doctest::Approx(cfg.lambda_smooth * (3.0 * 0.02 * 0.02) / 3.0));

  DriveLog no_power = log;
  no_power.p_bat_w.clear();
  CHECK_THROWS_AS(hybrid_loss(truth, {}, no_power, cfg), MissingPowerChannel);
}

TEST_CASE("objective gradient matches central finite differences") {
  // Sinusoidal speed keeps both acceleration signs inside every window, so
  // no track coordinate is starved of data.
  std::vector<double> profile(300);
  for (int i = 0; i < 300; ++i) {
    profile[i] = 15.0 + 10.0 * std::sin(2.0 * 3.14159265358979323846 * i / 20.0);
  }
  const DriveLog log = simulate_log(VehicleParams{}, profile, 1.0, 40.0, 5);
  EstimatorConfig cfg;
  cfg.n_windows = 3;
  std::mt19937_64 rng(15);
  std::vector<double> raw(4 + 2 * cfg.n_windows);
  for (double& x : raw) x = vega_test::uniform01(rng) * 2.0 - 1.0;
  std::vector<double> residual(log.size());
  for (double& r : residual) r = (vega_test::uniform01(rng) - 0.5) * 100.0;

  std::vector<double> grad_raw, grad_res;
  fit_objective(raw, residual, log, cfg, &grad_raw, &grad_res);

  const auto loss_of_raw = [&](const std::vector<double>& r) {
    return fit_objective(r, residual, log, cfg).total();
  };
  const auto numeric_raw = vega_test::finite_difference(loss_of_raw, raw, 1e-6);
  // Floor the comparison against finite-difference cancellation noise,
  // which scales with the loss magnitude over the step size.
  double scale = 0.0;
  for (double g : grad_raw) scale = std::max(scale, std::abs(g));
  CHECK(vega_test::max_rel_error(grad_raw, numeric_raw, 1e-6 * scale) < 1e-5);

  // Spot-check a few residual coordinates (the full vector is large).
  std::vector<double> idx_grad, idx_num;
  for (std::size_t i : {0ul, 37ul, 150ul, 299ul}) {
    idx_grad.push_back(grad_res[i]);
    std::vector<double> perturbed = residual;
    const double eps = 1e-4;
    perturbed[i] = residual[i] + eps;
    const double hi = fit_objective(raw, perturbed, log, cfg).total();
    perturbed[i] = residual[i] - eps;
    const double lo = fit_objective(raw, perturbed, log, cfg).total();
    idx_num.push_back((hi - lo) / (2.0 * eps));
  }
  CHECK(vega_test::max_rel_error(idx_grad, idx_num, 1e-6) < 1e-5);
}

TEST_CASE("estimate recovers the generating parameters") {
  const VehicleParams truth;
  EstimatorConfig cfg;
  const EstimateResult clean = estimate(rich_log(), cfg);
  CHECK(rel_err(clean.params.eta, truth.eta) < 0.05);
  CHECK(rel_err(clean.params.mu, truth.mu) < 0.05);
  CHECK(rel_err(clean.params.mass_kg, truth.mass_kg) < 0.05);
  CHECK(rel_err(clean.params.c_rr, truth.c_rr) < 0.05);
  CHECK(rel_err(clean.params.c_d, truth.c_d) < 0.05);
  CHECK(rel_err(clean.params.p_aux_w, truth.p_aux_w) < 0.05);

  // Bounds are honored strictly.
  CHECK(clean.params.c_d > cfg.box_c_d.lo);
  CHECK(clean.params.c_d < cfg.box_c_d.hi);
  CHECK(clean.params.eta > cfg.box_eta.lo);
  CHECK(clean.params.eta < cfg.box_eta.hi);
}

TEST_CASE("estimate under multiplicative measurement noise") {
  const VehicleParams truth;
  DriveLog log = rich_log();
  std::mt19937_64 rng(2024);
  for (double& p : log.p_bat_w) {
    const double u1 = std::max(vega_test::uniform01(rng), 1e-300);
    const double u2 = vega_test::uniform01(rng);
    const double z =
        std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    p *= 1.0 + 0.01 * z;
  }
  const EstimateResult fit = estimate(log, EstimatorConfig{});
  CHECK(rel_err(fit.params.eta, truth.eta) < 0.15);
  CHECK(rel_err(fit.params.mu, truth.mu) < 0.15);
  CHECK(rel_err(fit.params.mass_kg, truth.mass_kg) < 0.15);
  CHECK(rel_err(fit.params.c_rr, truth.c_rr) < 0.15);
  CHECK(rel_err(fit.params.c_d, truth.c_d) < 0.15);
  CHECK(rel_err(fit.params.p_aux_w, truth.p_aux_w) < 0.15);
}

TEST_CASE("excitation gate and input guards") {
  const VehicleParams p;
  std::vector<double> flat(400, 0.0);
  const DriveLog dead = simulate_log(p, flat, 1.0, 0.0, 1);
  CHECK_THROWS_AS(estimate(dead, EstimatorConfig{}), InsufficientExcitation);

  DriveLog no_power = rich_log();
  no_power.p_bat_w.clear();
  CHECK_THROWS_AS(estimate(no_power, EstimatorConfig{}), MissingPowerChannel);

  DriveLog tiny = rich_log();
  tiny.t_s.resize(100);
  tiny.v_mps.resize(100);
  tiny.a_mps2.resize(100);
  tiny.p_bat_w.resize(100);
  CHECK_THROWS_AS(estimate(tiny, EstimatorConfig{}), InsufficientData);
}

TEST_CASE("identifiability condition separates rich logs") {
  EstimatorConfig cfg;
  EstimatorParams at;
  const VehicleParams p;
  at.c_d = p.c_d;
  at.c_rr = p.c_rr;
  at.mass_kg = p.mass_kg;
  at.p_aux_w = p.p_aux_w;
  at.eta_track = {p.eta};
  at.mu_track = {p.mu};
  const double cond = identifiability_condition(rich_log(), at, cfg);
  CHECK(std::isfinite(cond));
  CHECK(cond < 1e6);  // documented identifiability threshold
}

TEST_CASE("infer_power") {
  const VehicleParams p;
  DriveLog idle;
  idle.t_s = {0, 1, 2, 3};
  idle.v_mps = {0, 0, 0, 0};
  idle.a_mps2 = {0, 0, 0, 0};
  for (double w : infer_power(p, idle)) CHECK(w == doctest::Approx(p.p_aux_w));

  const DriveLog clean = rich_log();
  DriveLog speeds_only = clean;
  speeds_only.p_bat_w.clear();
  const auto inferred = infer_power(p, speeds_only);
  for (std::size_t t = 0; t < clean.size(); ++t) {
    CHECK(inferred[t] == clean.p_bat_w[t]);
  }

  // Steady cruise at 100 km/h draws about 15.4 kW.
  DriveLog cruise;
  const double v = 100.0 / 3.6;
  for (int i = 0; i < 10; ++i) {
    cruise.t_s.push_back(i);
    cruise.v_mps.push_back(v);
    cruise.a_mps2.push_back(0.0);
  }
  const auto watts = infer_power(p, cruise);
  CHECK(std::abs(watts[5] - 15432.0) < 5.0);
}

TEST_CASE("monotone best loss across iterations") {
  // Re-run the fit with increasing iteration caps: the best achievable loss
  // never gets worse.
  const DriveLog log = simulate_log(VehicleParams{}, vega_test::varied_speed_profile(400),
                                    1.0, 10.0, 3);
  double prev = std::numeric_limits<double>::infinity();
  for (int iters : {50, 200, 800}) {
    EstimatorConfig cfg;
    cfg.iterations = iters;
    cfg.patience = iters + 1;
    const EstimateResult r = estimate(log, cfg);
    CHECK(r.loss.total() <= prev * (1.0 + 1e-12));
    prev = r.loss.total();
  }
}

TEST_CASE("drive log CSV round trip and errors") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "vega_drive.csv").string();
  const DriveLog log = rich_log();
  log.save_csv(path);
  const DriveLog back = DriveLog::load_csv(path);
  CHECK(back.t_s == log.t_s);
  CHECK(back.v_mps == log.v_mps);
  CHECK(back.p_bat_w == log.p_bat_w);

  {
    std::ofstream f(path);
    f << "t_s,v_mps,p_bat_w\n0,0,100\n1,oops,100\n";
  }
  CHECK_THROWS_WITH_AS(DriveLog::load_csv(path), doctest::Contains("row 3"), ParseError);
  {
    std::ofstream f(path);
    f << "t_s,watts\n0,0\n1,1\n";
  }
  CHECK_THROWS_AS(DriveLog::load_csv(path), ParseError);
  fs::remove(path);
}

}  // TEST_SUITE
