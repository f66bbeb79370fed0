#include "citsbed/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace citsbed {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

GeoPosition::GeoPosition(double latitude_deg, double longitude_deg, double altitude_m)
    : latitude_deg_(latitude_deg), longitude_deg_(longitude_deg), altitude_m_(altitude_m) {
  if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0)) {
    throw std::invalid_argument("latitude out of range: " + std::to_string(latitude_deg));
  }
  if (!(longitude_deg >= -180.0 && longitude_deg <= 180.0)) {
    throw std::invalid_argument("longitude out of range: " + std::to_string(longitude_deg));
  }
  if (!std::isfinite(altitude_m)) {
    throw std::invalid_argument("altitude must be finite");
  }
}

double dbmToWatts(PowerDbm p) { return std::pow(10.0, (p.value - 30.0) / 10.0); }

PowerDbm wattsToDbm(double watts) {
  if (!(watts > 0.0)) {
    throw std::invalid_argument("power in watts must be positive");
  }
  return {10.0 * std::log10(watts) + 30.0};
}

double normalizeHeadingDeg(double heading_deg) {
  double h = std::fmod(heading_deg, 360.0);
  if (h < 0.0) h += 360.0;
  // fmod of a tiny negative value can round up to exactly 360
  if (h >= 360.0) h = 0.0;
  return h;
}

double haversineDistance(const GeoPosition& a, const GeoPosition& b) {
  const double lat1 = a.latitudeDeg() * kDegToRad;
  const double lat2 = b.latitudeDeg() * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.longitudeDeg() - a.longitudeDeg()) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

GeoPosition destinationPoint(const GeoPosition& origin, double bearing_deg, double distance_m) {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDegToRad;
  const double lat1 = origin.latitudeDeg() * kDegToRad;
  const double lon1 = origin.longitudeDeg() * kDegToRad;
  const double lat2 = std::asin(std::sin(lat1) * std::cos(delta) +
                                std::cos(lat1) * std::sin(delta) * std::cos(theta));
  const double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * std::sin(lat2));
  double lon_deg = std::remainder(lon2 / kDegToRad, 360.0);
  return GeoPosition(lat2 / kDegToRad, lon_deg, origin.altitudeM());
}

PowerDb freeSpaceLossDb(double distance_m, double fc_hz) {
  if (!(distance_m > 0.0)) {
    throw std::invalid_argument("free-space loss needs a positive distance");
  }
  if (!(fc_hz > 0.0)) {
    throw std::invalid_argument("free-space loss needs a positive carrier frequency");
  }
  return {20.0 * std::log10(4.0 * std::numbers::pi * distance_m * fc_hz / kSpeedOfLightMps)};
}

double headingDeltaDeg(double h1_deg, double h2_deg) {
  const double d = std::fabs(normalizeHeadingDeg(h1_deg) - normalizeHeadingDeg(h2_deg));
  return d > 180.0 ? 360.0 - d : d;
}

double wavelengthM(double fc_hz) { return kSpeedOfLightMps / fc_hz; }

}  // namespace citsbed
