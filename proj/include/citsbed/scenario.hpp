#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "citsbed/channel.hpp"
#include "citsbed/facilities.hpp"
#include "citsbed/gnss.hpp"

namespace citsbed {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StationRole { Obu, Rsu };

struct ScenarioStation {
  uint32_t id = 0;
  StationRole role = StationRole::Obu;
  // Exactly one of these is set. Traces share the scenario clock.
  std::optional<GeoPosition> static_position;
  std::optional<Trace> trace;
  std::string trace_path;  // informational, for error messages
  double tx_power_dbm = 26.0;
  bool transmit = true;
  uint8_t station_type = 5;
  CamTriggerConfig trigger;
};

struct ScenarioConfig {
  std::vector<ScenarioStation> stations;
  LinkBudgetConfig link;  // tx_power_dbm is overridden per station
  PropagationModel model = FreeSpaceModel{};
  int64_t start_ms = 0;
  int64_t duration_ms = 10000;
  int64_t check_period_ms = 10;

  /// Throws ScenarioError.
  void validate() const;
};

/// Loads a YAML scenario; trace paths resolve relative to the file's directory.
ScenarioConfig loadScenarioConfig(const std::string& path);

enum class EventType { Tx, Rx };

struct ScenarioEvent {
  int64_t time_ms = 0;
  EventType type = EventType::Tx;
  uint32_t sender_id = 0;
  std::optional<uint32_t> receiver_id;
  double tx_lat = 0.0;
  double tx_lon = 0.0;
  std::optional<double> rx_lat;
  std::optional<double> rx_lon;
  std::optional<double> p_rx_dbm;
};

/// Deterministic discrete-event run over [start_ms, start_ms + duration_ms).
/// Every CAM travels through the real codec and frame encoding.
std::vector<ScenarioEvent> runScenario(const ScenarioConfig& cfg);

/// CSV `time_ms,event,sender_id,receiver_id,tx_lat,tx_lon,rx_lat,rx_lon,p_rx_dbm`.
void writeEventLog(std::ostream& out, const std::vector<ScenarioEvent>& events);
std::string formatEventRow(const ScenarioEvent& e);
inline constexpr const char* kEventLogHeader =
    "time_ms,event,sender_id,receiver_id,tx_lat,tx_lon,rx_lat,rx_lon,p_rx_dbm";

}  // namespace citsbed
