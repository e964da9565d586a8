#pragma once

#include "vega/errors.hpp"

namespace vega {

// Mean Earth radius, km.
inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  bool operator==(const GeoPoint&) const = default;
};

// Throws InvalidArgument if the point is out of bounds or non-finite.
void validate(const GeoPoint& p);

// Great-circle distance in km on the mean-radius sphere.
// Symmetric, nonnegative, zero iff both points coincide (up to fp tolerance).
double haversine_km(const GeoPoint& a, const GeoPoint& b);

}  // namespace vega
