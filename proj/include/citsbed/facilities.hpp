#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "citsbed/codec.hpp"
#include "citsbed/core.hpp"

namespace citsbed {

struct CamTriggerConfig {
  double heading_threshold_deg = 4.0;
  double position_threshold_m = 4.0;
  double speed_threshold_mps = 0.5;
  int64_t t_gen_min_ms = 100;
  int64_t t_gen_max_ms = 1000;
  // When set, CAMs go out at this strict period regardless of dynamics.
  std::optional<int64_t> forced_period_ms;

  /// Throws std::invalid_argument when thresholds or periods are inconsistent.
  void validate() const;
};

struct CamServiceState {
  KinematicState last_cam_state;
  int64_t last_cam_time_ms = 0;
};

enum class TriggerReason {
  FirstCam,
  MinPeriodNotElapsed,
  MaxPeriodElapsed,
  HeadingChange,
  PositionChange,
  SpeedChange,
  NoDynamicsChange,
  ForcedPeriodElapsed,
  ForcedPeriodNotElapsed,
};

std::string_view toString(TriggerReason reason);

struct TriggerDecision {
  bool generate = false;
  TriggerReason reason = TriggerReason::NoDynamicsChange;
};

/// Generation rule evaluated at `now.timestamp_ms`. Pure function of its inputs.
TriggerDecision checkCamTrigger(const CamServiceState& prev, const KinematicState& now,
                                const CamTriggerConfig& cfg);

/// Quantizes a kinematic state into CAM units (half-away-from-zero rounding).
CamPayload buildCam(const KinematicState& state, uint32_t station_id, int64_t now_ms,
                    uint8_t station_type = 5);

/// Per-station CAM generation service. Owns its state and is driven by a
/// single transmit task.
class CamService {
 public:
  CamService(uint32_t station_id, uint8_t station_type, CamTriggerConfig cfg);

  /// Returns a CAM when the trigger rule fires at `state.timestamp_ms`.
  std::optional<CamPayload> poll(const KinematicState& state);

  TriggerDecision lastDecision() const { return last_decision_; }
  const std::optional<CamServiceState>& state() const { return state_; }
  const CamTriggerConfig& config() const { return cfg_; }
  uint32_t stationId() const { return station_id_; }

 private:
  uint32_t station_id_;
  uint8_t station_type_;
  CamTriggerConfig cfg_;
  std::optional<CamServiceState> state_;
  TriggerDecision last_decision_;
};

}  // namespace citsbed
