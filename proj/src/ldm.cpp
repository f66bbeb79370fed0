#include "citsbed/ldm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace citsbed {

namespace {

std::vector<LdmEntry> sortedById(std::vector<LdmEntry> v) {
  std::sort(v.begin(), v.end(),
            [](const LdmEntry& a, const LdmEntry& b) { return a.station_id < b.station_id; });
  return v;
}

// Lat/lon box that contains every point within radius_m of center, or nullopt
// when the box would wrap a pole or the antimeridian.
struct LatLonBox {
  double lat_min, lat_max, lon_min, lon_max;
};

std::optional<LatLonBox> boundingBox(const GeoPosition& center, double radius_m) {
  constexpr double kMarginDeg = 1e-9;
  const double dlat = radius_m / kEarthRadiusM * 180.0 / std::numbers::pi * 1.001 + kMarginDeg;
  const double lat_min = center.latitudeDeg() - dlat;
  const double lat_max = center.latitudeDeg() + dlat;
  if (lat_min <= -89.0 || lat_max >= 89.0) return std::nullopt;
  const double cos_lat = std::cos(std::max(std::fabs(lat_min), std::fabs(lat_max)) *
                                  std::numbers::pi / 180.0);
  const double dlon = dlat / cos_lat;
  const double lon_min = center.longitudeDeg() - dlon;
  const double lon_max = center.longitudeDeg() + dlon;
  if (dlon >= 180.0 || lon_min < -180.0 || lon_max > 180.0) return std::nullopt;
  return LatLonBox{lat_min, lat_max, lon_min, lon_max};
}

}  // namespace

void LdmConfig::validate() const {
  if (max_age_ms <= 0 || sweep_period_ms <= 0) {
    throw std::invalid_argument("LDM ages and sweep period must be positive");
  }
  if (sweep_period_ms > max_age_ms) {
    throw std::invalid_argument("LDM sweep_period_ms must not exceed max_age_ms");
  }
}

UpsertResult LdmStore::upsert(const LdmEntry& entry) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.insert_or_assign(entry.station_id, entry);
  return inserted ? UpsertResult::Inserted : UpsertResult::Updated;
}

std::vector<LdmEntry> LdmStore::all() const {
  std::vector<LdmEntry> out;
  {
    std::lock_guard lock(mutex_);
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back(e);
  }
  return sortedById(std::move(out));
}

std::optional<LdmEntry> LdmStore::find(uint32_t station_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(station_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<LdmEntry> LdmStore::queryArea(const GeoPosition& center, double radius_m) const {
  if (radius_m < 0.0) throw std::invalid_argument("query radius must be non-negative");
  const auto box = boundingBox(center, radius_m);
  std::vector<LdmEntry> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, e] : entries_) {
      if (box) {
        const double lat = e.position.latitudeDeg();
        const double lon = e.position.longitudeDeg();
        if (lat < box->lat_min || lat > box->lat_max || lon < box->lon_min || lon > box->lon_max) {
          continue;
        }
      }
      if (haversineDistance(center, e.position) <= radius_m) out.push_back(e);
    }
  }
  return sortedById(std::move(out));
}

size_t LdmStore::purgeExpired(int64_t now_ms, const LdmConfig& cfg) {
  std::lock_guard lock(mutex_);
  return std::erase_if(entries_, [&](const auto& kv) {
    return now_ms - kv.second.last_update_ms > cfg.max_age_ms;
  });
}

size_t LdmStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

int64_t systemClockMs() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

LdmSweeper::LdmSweeper(LdmStore& store, LdmConfig cfg, Clock clock)
    : store_(store), cfg_(cfg), clock_(std::move(clock)) {
  cfg_.validate();
  thread_ = std::jthread([this](std::stop_token token) { run(token); });
}

LdmSweeper::~LdmSweeper() { stop(); }

void LdmSweeper::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    cv_.notify_all();
    thread_.join();
  }
}

void LdmSweeper::run(std::stop_token token) {
  auto next = std::chrono::steady_clock::now();
  std::unique_lock lock(mutex_);
  while (!token.stop_requested()) {
    next += std::chrono::milliseconds(cfg_.sweep_period_ms);
    if (cv_.wait_until(lock, token, next, [] { return false; })) break;
    if (token.stop_requested()) break;
    store_.purgeExpired(clock_(), cfg_);
    ++sweeps_;
  }
}

}  // namespace citsbed
