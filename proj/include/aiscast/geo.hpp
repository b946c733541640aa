#pragma once
// Spherical geometry helpers shared by the cleaning pipeline, the synthetic
// generator, and forecasting.

#include <cmath>
#include <stdexcept>

#include "aiscast/fourhot.hpp"

namespace aiscast {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEarthRadiusNmi = 3440.065;  // mean Earth radius, nautical miles

inline double deg2rad(double d) { return d * (kPi / 180.0); }
inline double rad2deg(double r) { return r * (180.0 / kPi); }

// Great-circle distance in nautical miles via the haversine form, which is
// well conditioned at small separations.
inline double haversine_nmi(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = deg2rad(lat1);
  const double phi2 = deg2rad(lat2);
  const double dphi = deg2rad(lat2 - lat1);
  const double dlam = deg2rad(lon2 - lon1);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  if (a < 0.0) a = 0.0;
  if (a > 1.0) a = 1.0;  // representation noise can push slightly past 1
  return 2.0 * kEarthRadiusNmi * std::asin(std::sqrt(a));
}

inline double haversine_nmi(const ContinuousObs& a, const ContinuousObs& b) {
  return haversine_nmi(a.lat, a.lon, b.lat, b.lon);
}

// Advances a position by d nautical miles on heading theta (degrees, 0 =
// north, clockwise) using a local tangent-plane step: one arcminute of
// latitude is one nautical mile, and longitude arcminutes shrink by
// cos(latitude).
inline void advance_position(double& lat, double& lon, double distance_nmi,
                             double heading_deg) {
  const double th = deg2rad(heading_deg);
  const double dlat = distance_nmi * std::cos(th) / 60.0;
  const double coslat = std::cos(deg2rad(lat));
  if (std::abs(coslat) < 1e-9)
    throw std::domain_error("advance_position: undefined longitude step at the pole");
  const double dlon = distance_nmi * std::sin(th) / (60.0 * coslat);
  lat += dlat;
  lon += dlon;
}

}  // namespace aiscast
