#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "citsbed/core.hpp"
#include "citsbed/gnss.hpp"

namespace citsbed {

struct RxLogRecord {
  int64_t rx_time_ms = 0;
  uint32_t sender_id = 0;
  GeoPosition tx_position;  // from the CAM payload
  GeoPosition rx_position;  // receiver GNSS
  std::optional<double> p_rx_dbm;
};

/// Reads either the plain RX log
/// `rx_time_ms,sender_id,tx_lat,tx_lon,rx_lat,rx_lon[,p_rx_dbm]` or a scenario
/// event log (TX rows skipped). `receiver_id` filters scenario logs.
/// Throws FormatError (from rfanalysis.hpp) on malformed rows.
std::vector<RxLogRecord> parseRxLog(std::istream& in, const std::string& name = "<log>",
                                    std::optional<uint32_t> receiver_id = std::nullopt);
std::vector<RxLogRecord> loadRxLog(const std::string& path,
                                   std::optional<uint32_t> receiver_id = std::nullopt);

struct SenderCluster {
  uint32_t sender_id = 0;
  GeoPosition mean_position;
  bool first_flag = false;
  int64_t first_rx_time_ms = 0;
  size_t size = 0;
};

/// Per sender, consecutive messages in arrival order grouped into blocks of
/// `group_size` (partial trailing block dropped). Output sorted by sender id.
std::vector<SenderCluster> clusterBySender(std::span<const RxLogRecord> records, size_t group_size = 10);

struct PdrWindow {
  int64_t window_start_ms = 0;
  std::optional<GeoPosition> mean_rx_position;
  int received_count = 0;
  int expected_count = 0;
  std::optional<double> distance_m;  // to the transmitter
};

struct PdrOptions {
  int64_t tx_period_ms = 100;
  int64_t window_ms = 1000;
  GeoPosition tx_position;
  // Fills positions for empty windows and extends the window span to the trace end.
  const Trace* receiver_trace = nullptr;
};

/// Consecutive [k*window, (k+1)*window) bins anchored at the floor of the
/// first record's time. Records are expected to come from a single sender.
std::vector<PdrWindow> windowPdr(std::span<const RxLogRecord> records, const PdrOptions& options);

struct RangeBin {
  double distance_start_m = 0.0;
  double mean_pdr = 0.0;
  size_t windows = 0;
};

struct RangeEstimate {
  double max_rx_distance_m = 0.0;
  std::vector<RangeBin> distance_pdr_curve;  // 10 m bins, ascending
};

inline constexpr double kRangeBinWidthM = 10.0;

/// Throws std::invalid_argument when no window with a distance received anything.
RangeEstimate estimateRange(std::span<const PdrWindow> windows);

/// "#rrggbb" on a linear ramp from black (0) to dark green (max).
std::string pdrColor(int received, int max_count);

nlohmann::json emitGeoJson(std::span<const SenderCluster> clusters);
nlohmann::json emitGeoJson(std::span<const PdrWindow> windows);

void writeWindowsCsv(std::ostream& out, std::span<const PdrWindow> windows);

}  // namespace citsbed
