#include "vega/geo.hpp"

#include <cmath>

namespace vega {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

void validate(const GeoPoint& p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) {
    throw InvalidArgument("GeoPoint has non-finite coordinates");
  }
  if (p.lat < -90.0 || p.lat > 90.0) {
    throw InvalidArgument("latitude out of [-90, 90]: " + std::to_string(p.lat));
  }
  if (p.lon < -180.0 || p.lon > 180.0) {
    throw InvalidArgument("longitude out of [-180, 180]: " + std::to_string(p.lon));
  }
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double sin_dlat = std::sin(dlat / 2.0);
  const double sin_dlon = std::sin(dlon / 2.0);
  const double h =
      sin_dlat * sin_dlat + std::cos(lat1) * std::cos(lat2) * sin_dlon * sin_dlon;
  const double clamped = h > 1.0 ? 1.0 : (h < 0.0 ? 0.0 : h);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(clamped));
}

}  // namespace vega
