#include "vega/energy.hpp"

#include <cmath>
#include <fstream>

#include "vega/errors.hpp"

namespace vega {

namespace {
constexpr double kKmhToMps = 1.0 / 3.6;
constexpr double kJoulesPerKwh = 3.6e6;

double require_finite(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number()) {
    throw ParseError(std::string("vehicle params: missing numeric field '") + field + "'");
  }
  const double v = j.at(field).get<double>();
  if (!std::isfinite(v)) {
    throw ParseError(std::string("vehicle params: non-finite field '") + field + "'");
  }
  return v;
}
}  // namespace

void VehicleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("vehicle param '") + name + "' must be positive");
    }
  };
  positive(c_d, "c_d");
  positive(c_rr, "c_rr");
  positive(mass_kg, "mass_kg");
  positive(p_aux_w, "p_aux_w");
  positive(eta, "eta");
  positive(mu, "mu");
  positive(frontal_area_m2, "frontal_area_m2");
  positive(air_density, "air_density");
  positive(g, "g");
  positive(battery_kwh, "battery_kwh");
  if (eta > 1.0) throw InvalidArgument("vehicle param 'eta' must be <= 1");
  if (mu > 1.0) throw InvalidArgument("vehicle param 'mu' must be <= 1");
}

VehicleParams VehicleParams::from_json(const nlohmann::json& j) {
  VehicleParams p;
  p.c_d = require_finite(j, "c_d");
  p.c_rr = require_finite(j, "c_rr");
  p.mass_kg = require_finite(j, "mass_kg");
  p.p_aux_w = require_finite(j, "p_aux_w");
  p.eta = require_finite(j, "eta");
  p.mu = require_finite(j, "mu");
  p.frontal_area_m2 = require_finite(j, "frontal_area_m2");
  p.air_density = require_finite(j, "air_density");
  p.battery_kwh = require_finite(j, "battery_kwh");
  if (j.contains("g")) p.g = require_finite(j, "g");
  p.validate();
  return p;
}

nlohmann::json VehicleParams::to_json() const {
  return nlohmann::json{{"c_d", c_d},
                        {"c_rr", c_rr},
                        {"mass_kg", mass_kg},
                        {"p_aux_w", p_aux_w},
                        {"eta", eta},
                        {"mu", mu},
                        {"frontal_area_m2", frontal_area_m2},
                        {"air_density", air_density},
                        {"g", g},
                        {"battery_kwh", battery_kwh}};
}

VehicleParams VehicleParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open params file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

void VehicleParams::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << to_json().dump(2) << '\n';
}

double mechanical_power_w(double v_mps, double a_mps2, const VehicleParams& p) {
  if (v_mps < 0.0 || !std::isfinite(v_mps)) {
    throw InvalidArgument("speed must be nonnegative");
  }
  const double aero = 0.5 * p.air_density * p.frontal_area_m2 * p.c_d * v_mps * v_mps * v_mps;
  const double roll = p.c_rr * p.mass_kg * p.g * v_mps;
  const double inertial = p.mass_kg * a_mps2 * v_mps;
  return aero + roll + inertial;
}

double battery_power_w(double v_mps, double a_mps2, const VehicleParams& p) {
  const double pm = mechanical_power_w(v_mps, a_mps2, p);
  const double regen = a_mps2 < 0.0 ? p.mu * pm : 0.0;
  return pm / p.eta - regen + p.p_aux_w;
}

double cruise_energy_kwh(double d_km, double v_kmh, const VehicleParams& p) {
  if (!(d_km >= 0.0)) throw InvalidArgument("distance must be nonnegative");
  if (!(v_kmh > 0.0)) throw InvalidArgument("speed must be positive");
  if (d_km == 0.0) return 0.0;
  const double v = v_kmh * kKmhToMps;
  const double cruise_pm =
      0.5 * p.air_density * p.frontal_area_m2 * p.c_d * v * v * v +
      p.c_rr * p.mass_kg * p.g * v;
  const double p_bat = cruise_pm / p.eta + p.p_aux_w;
  const double dt_s = d_km / v_kmh * 3600.0;
  return dt_s * p_bat / kJoulesPerKwh;
}

SegmentCost segment_cost(const Edge& edge, const VehicleParams& p) {
  if (!(edge.length_km > 0.0)) throw InvalidArgument("segment length must be positive");
  if (!(edge.speed_limit_kmh > 0.0)) throw InvalidArgument("segment speed must be positive");
  SegmentCost c;
  c.energy_kwh = cruise_energy_kwh(edge.length_km, edge.speed_limit_kmh, p);
  c.time_h = edge.length_km / edge.speed_limit_kmh;
  c.soc_drop_pct = 100.0 * c.energy_kwh / p.battery_kwh;
  return c;
}

BatteryState discharge(const BatteryState& b, const SegmentCost& cost) {
  const double soc = b.soc_pct - cost.soc_drop_pct;
  if (soc < 0.0) {
    throw DepletedError(-soc);
  }
  return BatteryState{soc};
}

}  // namespace vega
