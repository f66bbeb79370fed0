#include "citsbed/facilities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace citsbed {

void CamTriggerConfig::validate() const {
  if (!(heading_threshold_deg > 0.0 && position_threshold_m > 0.0 && speed_threshold_mps > 0.0)) {
    throw std::invalid_argument("CAM trigger thresholds must be positive");
  }
  if (t_gen_min_ms <= 0 || t_gen_min_ms > t_gen_max_ms) {
    throw std::invalid_argument("CAM trigger needs 0 < t_gen_min_ms <= t_gen_max_ms");
  }
  if (forced_period_ms && *forced_period_ms <= 0) {
    throw std::invalid_argument("forced_period_ms must be positive");
  }
}

std::string_view toString(TriggerReason reason) {
  switch (reason) {
    case TriggerReason::FirstCam: return "first";
    case TriggerReason::MinPeriodNotElapsed: return "min_period";
    case TriggerReason::MaxPeriodElapsed: return "max_period";
    case TriggerReason::HeadingChange: return "heading";
    case TriggerReason::PositionChange: return "position";
    case TriggerReason::SpeedChange: return "speed";
    case TriggerReason::NoDynamicsChange: return "no_change";
    case TriggerReason::ForcedPeriodElapsed: return "forced";
    case TriggerReason::ForcedPeriodNotElapsed: return "forced_wait";
  }
  return "unknown";
}

TriggerDecision checkCamTrigger(const CamServiceState& prev, const KinematicState& now,
                                const CamTriggerConfig& cfg) {
  const int64_t elapsed = now.timestamp_ms - prev.last_cam_time_ms;

  if (cfg.forced_period_ms) {
    if (elapsed >= *cfg.forced_period_ms) return {true, TriggerReason::ForcedPeriodElapsed};
    return {false, TriggerReason::ForcedPeriodNotElapsed};
  }

  if (elapsed < cfg.t_gen_min_ms) return {false, TriggerReason::MinPeriodNotElapsed};
  if (elapsed >= cfg.t_gen_max_ms) return {true, TriggerReason::MaxPeriodElapsed};

  const KinematicState& last = prev.last_cam_state;
  if (headingDeltaDeg(last.heading_deg, now.heading_deg) >= cfg.heading_threshold_deg) {
    return {true, TriggerReason::HeadingChange};
  }
  if (haversineDistance(last.position, now.position) >= cfg.position_threshold_m) {
    return {true, TriggerReason::PositionChange};
  }
  if (std::fabs(now.speed_mps - last.speed_mps) >= cfg.speed_threshold_mps) {
    return {true, TriggerReason::SpeedChange};
  }
  return {false, TriggerReason::NoDynamicsChange};
}

CamPayload buildCam(const KinematicState& state, uint32_t station_id, int64_t now_ms,
                    uint8_t station_type) {
  CamPayload p;
  p.station_id = station_id;
  p.generation_delta_time = static_cast<uint16_t>(((now_ms % 65536) + 65536) % 65536);
  // std::round rounds half away from zero
  p.latitude_tenth_udeg = static_cast<int32_t>(std::round(state.position.latitudeDeg() * 1e7));
  p.longitude_tenth_udeg = static_cast<int32_t>(std::round(state.position.longitudeDeg() * 1e7));
  p.altitude_cm = static_cast<int32_t>(std::round(state.position.altitudeM() * 100.0));
  const double speed_cmps = std::round(std::max(0.0, state.speed_mps) * 100.0);
  p.speed_cmps = static_cast<uint16_t>(
      std::min(speed_cmps, static_cast<double>(std::numeric_limits<uint16_t>::max())));
  const auto heading = static_cast<int64_t>(std::round(normalizeHeadingDeg(state.heading_deg) * 10.0));
  p.heading_tenth_deg = static_cast<uint16_t>(heading % 3600);
  p.station_type = station_type;
  return p;
}

CamService::CamService(uint32_t station_id, uint8_t station_type, CamTriggerConfig cfg)
    : station_id_(station_id), station_type_(station_type), cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::optional<CamPayload> CamService::poll(const KinematicState& state) {
  if (!state_) {
    last_decision_ = {true, TriggerReason::FirstCam};
  } else {
    last_decision_ = checkCamTrigger(*state_, state, cfg_);
  }
  if (!last_decision_.generate) return std::nullopt;
  state_ = CamServiceState{state, state.timestamp_ms};
  return buildCam(state, station_id_, state.timestamp_ms, station_type_);
}

}  // namespace citsbed
