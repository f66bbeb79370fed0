#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "citsbed/core.hpp"

namespace citsbed {

class GnssParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FixUpdate {
  GeoPosition position;
  std::optional<double> speed_mps;
  std::optional<double> heading_deg;
  int64_t fix_time_ms = 0;
  // Consumers must not emit CAMs from an invalid fix.
  bool valid = false;
};

inline constexpr double kKnotsToMps = 0.514444;

/// XOR of the characters between '$' and '*' compared with the two hex digits after '*'.
bool validateNmeaChecksum(std::string_view line);

/// Parses an RMC sentence of any talker. Throws GnssParseError.
FixUpdate parseNmeaRmc(std::string_view line);

struct GgaFix {
  GeoPosition position;  // includes altitude above mean sea level
  int fix_quality = 0;
  int64_t time_of_day_ms = 0;
};

/// Parses a GGA sentence. Throws GnssParseError.
GgaFix parseNmeaGga(std::string_view line);

/// ddmm.mmmmmm / dddmm.mmmmmm field plus hemisphere letter.
struct NmeaCoordinate {
  std::string field;
  char hemisphere = 'N';
};
NmeaCoordinate formatNmeaCoordinate(double degrees, bool is_latitude);
double parseNmeaCoordinate(std::string_view field, char hemisphere);

/// Builds a checksummed RMC sentence (no trailing CRLF) from a fix.
std::string formatNmeaRmc(const FixUpdate& fix);

/// Feeds raw bytes from a serial-style stream and yields fixes from RMC
/// sentences, enriching altitude from the most recent GGA. Corrupt or
/// unsupported sentences are counted and skipped.
class NmeaStreamParser {
 public:
  std::vector<FixUpdate> feed(std::string_view bytes);
  uint64_t rejectedCount() const { return rejected_; }

 private:
  std::optional<FixUpdate> handleLine(std::string_view line);

  std::string pending_;
  std::optional<double> last_altitude_m_;
  uint64_t rejected_ = 0;
};

/// gpsd JSON report. Returns nullopt for non-TPV classes; mode < 2 yields an
/// invalid fix. Throws GnssParseError on malformed JSON.
std::optional<FixUpdate> parseGpsdTpv(std::string_view json_line);

/// "YYYY-MM-DDTHH:MM:SS[.fff]Z" to epoch milliseconds. Throws GnssParseError.
int64_t parseIso8601Ms(std::string_view text);

/// Kinematic trace: CSV `timestamp_ms,lat_deg,lon_deg,speed_mps,heading_deg`.
using Trace = std::vector<KinematicState>;

Trace parseTrace(std::istream& in, const std::string& source_name = "<trace>");
/// Throws GnssParseError on malformed rows or out-of-order timestamps.
Trace loadTrace(const std::string& path);
void writeTrace(std::ostream& out, const Trace& trace);

/// Straight-line constant-speed trace sampled every `period_ms` over [start, start + duration], both ends included.
Trace synthesizeStraightTrace(const GeoPosition& start, double heading_deg, double speed_mps,
                              int64_t start_ms, int64_t duration_ms, int64_t period_ms);

/// Latest record with timestamp <= t_ms (first record before the trace starts).
const KinematicState& sampleTraceHold(const Trace& trace, int64_t t_ms);
/// Linear interpolation of position between records, clamped at both ends.
GeoPosition interpolateTracePosition(const Trace& trace, int64_t t_ms);

/// Delivers trace records to `sink` at recorded inter-arrival times divided by
/// `speed_factor`. A factor of 0 delivers everything immediately. Returns the
/// number of records delivered before completion or a stop request.
size_t replayTrace(const Trace& trace, double speed_factor,
                   const std::function<void(const KinematicState&)>& sink,
                   std::stop_token stop = {});

/// Blocking multi-producer/multi-consumer queue with a fixed capacity.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

  /// Blocks while full. Returns false once the queue is closed.
  bool push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  /// Non-blocking; false when full or closed.
  bool tryPush(T value) {
    std::lock_guard lock(mutex_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  /// Waits up to `timeout`; nullopt on timeout or when closed and drained.
  template <typename Rep, typename Period>
  std::optional<T> pop(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock lock(mutex_);
    if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !items_.empty(); })) {
      return std::nullopt;
    }
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

 private:
  size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Connects to a gpsd daemon, enables JSON watch mode and forwards every TPV
/// report to `sink` from its own thread until stopped or disconnected.
class GpsdClient {
 public:
  GpsdClient(const std::string& host_port, std::function<void(const FixUpdate&)> sink);
  ~GpsdClient();

  GpsdClient(const GpsdClient&) = delete;
  GpsdClient& operator=(const GpsdClient&) = delete;

  void stop();
  bool connected() const { return connected_; }

 private:
  void run();

  int fd_ = -1;
  std::function<void(const FixUpdate&)> sink_;
  std::atomic<bool> connected_{false};
  std::atomic<bool> stopping_{false};
  std::jthread thread_;
};

}  // namespace citsbed
