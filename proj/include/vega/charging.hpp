#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace vega {

// One point of a measured charging profile: cumulative minutes to reach
// `soc_pct` starting from an empty pack.
struct ChargeSample {
  double soc_pct = 0.0;
  double minutes_from_empty = 0.0;
};

// Polynomial charging-time surrogate without intercept: cumulative time from
// empty is t(b) = sum_k w[k] * b^(k+1), so t(0) = 0 structurally. Validated
// at construction to be strictly increasing on (0, 100] over a 0.1% grid.
// Immutable after construction; all operations are pure.
class ChargeCurve {
 public:
  explicit ChargeCurve(std::vector<double> w);

  const std::vector<double>& coefficients() const { return w_; }

  // Cumulative minutes from an empty pack to `soc_pct`.
  double time_from_empty_min(double soc_pct) const;

  static ChargeCurve from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ChargeCurve load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<double> w_;
};

// Minutes to charge from b_i to b_f: t(b_f) - t(b_i). Requires
// 0 <= b_i <= b_f <= 100.
double charge_time_min(const ChargeCurve& curve, double b_i_pct, double b_f_pct);

// Inverse of charge_time_min in its second argument: the SoC reached after
// charging from `b_i_pct` for `minutes`, capped at 100. Bisection to 1e-6 pct.
double soc_after_charging(const ChargeCurve& curve, double b_i_pct, double minutes);

// No-intercept ridge fit of the charging profile, one candidate polynomial
// degree at a time, degree chosen by minimum leave-one-out CV squared error
// (lowest degree wins ties). The fit runs on the scaled basis u = b/100 and
// the ridge penalty applies to the scaled coefficients. Requires >= 8 samples
// with distinct SoC values and nondecreasing times (else InsufficientData);
// throws NonMonotoneFit if the winning fit is not strictly increasing.
ChargeCurve fit_charge_curve(const std::vector<ChargeSample>& samples,
                             double ridge_lambda,
                             const std::vector<int>& degrees = {4, 5, 6});

// Anchor profile approximating a Model 3 Long Range supercharging session
// (10 -> 80% in 27 min, with the 20 -> 80% and 80 -> 100% stretches taking
// comparable time).
const std::vector<ChargeSample>& default_charge_samples();

// Degree-5 curve fitted to default_charge_samples(); used by the planner and
// the environment unless a custom curve is supplied.
const ChargeCurve& default_charge_curve();

// Parses `soc_pct,minutes` CSV (header required).
std::vector<ChargeSample> load_charge_samples(const std::string& path);

}  // namespace vega
