#pragma once

#include <string>

#include "json.hpp"
#include "vega/road_graph.hpp"

namespace vega {

// Physical parameter set of one vehicle. Defaults are the shipped estimates
// for a Model 3 Long Range class vehicle (drag, rolling resistance, mass,
// auxiliary load, drivetrain and regen efficiencies) together with a 2.22 m^2
// frontal area, sea-level air density and a 67.5 kWh pack.
struct VehicleParams {
  double c_d = 0.2349;             // aerodynamic drag coefficient
  double c_rr = 0.009462;          // rolling-resistance coefficient
  double mass_kg = 1977.0;
  double p_aux_w = 1046.0;         // HVAC, lights, accessories
  double eta = 0.8302;             // motor/drivetrain efficiency, (0, 1]
  double mu = 0.7413;              // regenerative-braking efficiency, [0, 1]
  double frontal_area_m2 = 2.22;
  double air_density = 1.225;      // kg/m^3
  double g = 9.81;                 // m/s^2
  double battery_kwh = 67.5;

  void validate() const;

  static VehicleParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static VehicleParams load(const std::string& path);
  void save(const std::string& path) const;
};

struct BatteryState {
  double soc_pct = 0.0;  // [0, 100]
};

// Cost of traversing one road segment at cruise speed.
struct SegmentCost {
  double energy_kwh = 0.0;
  double time_h = 0.0;
  double soc_drop_pct = 0.0;  // 100 * energy_kwh / battery_kwh
};

// Wheel-side mechanical power on flat road:
//   0.5*rho*A*C_d*v^3 + C_rr*m*g*v + m*a*v   [W]
// v in m/s, a in m/s^2. Throws InvalidArgument on v < 0.
double mechanical_power_w(double v_mps, double a_mps2, const VehicleParams& p);

// Battery-side power: (1/eta)*P_m - mu*P_m*[a<0] + P_aux  [W].
double battery_power_w(double v_mps, double a_mps2, const VehicleParams& p);

// Cruise energy in kWh for distance d_km at constant speed v_kmh, no stops:
//   dt * [ (0.5*rho*A*C_d*v^3 + C_rr*m*g*v) / eta + P_aux ]
double cruise_energy_kwh(double d_km, double v_kmh, const VehicleParams& p);

// Segment traversal at the posted speed limit (a = 0, no intermediate stops).
SegmentCost segment_cost(const Edge& edge, const VehicleParams& p);

// soc' = soc - soc_drop. Throws DepletedError (with the deficit) if the
// result would be negative; an exact-zero result is returned, not thrown.
BatteryState discharge(const BatteryState& b, const SegmentCost& cost);

}  // namespace vega
