#pragma once

#include <cstdint>
#include <numbers>

namespace citsbed {

inline constexpr double kSpeedOfLightMps = 299792458.0;
inline constexpr double kEarthRadiusM = 6371000.0;

/// WGS-84 position. Construction rejects NaN and out-of-range coordinates.
class GeoPosition {
 public:
  GeoPosition() = default;
  GeoPosition(double latitude_deg, double longitude_deg, double altitude_m = 0.0);

  double latitudeDeg() const { return latitude_deg_; }
  double longitudeDeg() const { return longitude_deg_; }
  double altitudeM() const { return altitude_m_; }

  bool operator==(const GeoPosition&) const = default;

 private:
  double latitude_deg_ = 0.0;
  double longitude_deg_ = 0.0;
  double altitude_m_ = 0.0;
};

struct KinematicState {
  GeoPosition position;
  double speed_mps = 0.0;
  double heading_deg = 0.0;  // [0, 360)
  int64_t timestamp_ms = 0;

  bool operator==(const KinematicState&) const = default;
};

// Strong scalar types for absolute (dBm) and relative (dB) power levels.
struct PowerDb {
  double value = 0.0;
  auto operator<=>(const PowerDb&) const = default;
};

struct PowerDbm {
  double value = 0.0;
  auto operator<=>(const PowerDbm&) const = default;
};

inline PowerDbm operator+(PowerDbm p, PowerDb g) { return {p.value + g.value}; }
inline PowerDbm operator-(PowerDbm p, PowerDb l) { return {p.value - l.value}; }
inline PowerDb operator-(PowerDbm a, PowerDbm b) { return {a.value - b.value}; }
inline PowerDb operator+(PowerDb a, PowerDb b) { return {a.value + b.value}; }
inline PowerDb operator-(PowerDb a, PowerDb b) { return {a.value - b.value}; }

double dbmToWatts(PowerDbm p);
PowerDbm wattsToDbm(double watts);

double normalizeHeadingDeg(double heading_deg);

/// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversineDistance(const GeoPosition& a, const GeoPosition& b);

/// Point reached travelling `distance_m` from `origin` along initial bearing `bearing_deg`.
GeoPosition destinationPoint(const GeoPosition& origin, double bearing_deg, double distance_m);

/// Free-space loss 20*log10(4*pi*d*fc/c). Throws std::invalid_argument for d <= 0 or fc <= 0.
PowerDb freeSpaceLossDb(double distance_m, double fc_hz);

/// Minimal circular difference between two headings, in [0, 180].
double headingDeltaDeg(double h1_deg, double h2_deg);

double wavelengthM(double fc_hz);

}  // namespace citsbed
