#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "citsbed/facilities.hpp"
#include "citsbed/gnss.hpp"
#include "citsbed/ldm.hpp"
#include "citsbed/scenario.hpp"
#include "citsbed/transport.hpp"

namespace citsbed {

struct StationConfig {
  uint32_t station_id = 1;
  uint8_t station_type = 5;
  double tx_power_dbm = 26.0;
  CamTriggerConfig trigger;
  LdmConfig ldm;
  bool ldm_api = true;
  int64_t check_period_ms = 10;
  size_t gnss_queue_capacity = 64;

  void validate() const;
};

/// Loads a station YAML file. Keys: station_id, station_type, tx_power_dbm,
/// check_period_ms, forced_period_ms, trigger{...}, ldm{max_age_ms,
/// sweep_period_ms, api_port}, channel{...} (used by the sim transport).
struct StationFile {
  StationConfig station;
  LinkBudgetConfig link;
  PropagationModel model = FreeSpaceModel{};
};
StationFile loadStationConfig(const std::string& path);

/// TX/RX events in the same shape as the scenario log.
using EventSink = std::function<void(const ScenarioEvent&)>;

/// A running station: GNSS intake, CAM transmit loop, receive loop, LDM
/// sweeper and LDM API, each on its own thread.
class StationRuntime {
 public:
  StationRuntime(StationConfig cfg, std::shared_ptr<Transport> transport, Clock clock, EventSink sink);
  ~StationRuntime();

  StationRuntime(const StationRuntime&) = delete;
  StationRuntime& operator=(const StationRuntime&) = delete;

  /// Throws net::NetError when the LDM API cannot bind.
  void start();
  void stop();

  /// Hands a fix to the GNSS task. Blocks while the queue is full; false
  /// after stop().
  bool submitFix(const FixUpdate& fix);
  bool submitState(const KinematicState& state);

  const LdmStore& ldm() const { return ldm_; }
  std::optional<uint16_t> ldmApiPort() const;

  uint64_t txCount() const { return tx_count_.load(); }
  uint64_t rxCount() const { return rx_count_.load(); }
  uint64_t opaqueCount() const { return opaque_count_.load(); }
  uint64_t droppedFrames() const { return dropped_.load(); }

 private:
  void gnssLoop(std::stop_token token);
  void txLoop(std::stop_token token);
  void rxLoop(std::stop_token token);
  void handleFrame(const ReceivedFrame& rx);
  std::optional<KinematicState> latestState() const;

  StationConfig cfg_;
  std::shared_ptr<Transport> transport_;
  Clock clock_;
  EventSink sink_;
  LdmStore ldm_;
  CamService cam_service_;
  BoundedQueue<FixUpdate> gnss_queue_;

  mutable std::mutex state_mutex_;
  std::optional<KinematicState> latest_;

  std::atomic<uint64_t> tx_count_{0};
  std::atomic<uint64_t> rx_count_{0};
  std::atomic<uint64_t> opaque_count_{0};
  std::atomic<uint64_t> dropped_{0};

  std::unique_ptr<LdmSweeper> sweeper_;
  std::unique_ptr<LdmApiServer> api_;
  std::jthread gnss_thread_;
  std::jthread tx_thread_;
  std::jthread rx_thread_;
  bool started_ = false;
};

}  // namespace citsbed
