#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "citsbed/core.hpp"

namespace citsbed {

enum class LdmEntryKind { Cam, Opaque };

struct LdmEntry {
  uint32_t station_id = 0;
  LdmEntryKind kind = LdmEntryKind::Cam;
  GeoPosition position;
  double speed_mps = 0.0;
  double heading_deg = 0.0;
  int64_t last_update_ms = 0;  // receiver clock
  uint16_t raw_generation_delta_time = 0;

  bool operator==(const LdmEntry&) const = default;
};

struct LdmConfig {
  int64_t max_age_ms = 5000;
  int64_t sweep_period_ms = 1000;
  uint16_t api_listen_port = 0;  // 0 picks an ephemeral port

  void validate() const;
};

enum class UpsertResult { Inserted, Updated };

/// Thread-safe Local Dynamic Map. Every operation holds the store lock for its
/// whole duration, so single-key upserts and sweeps are atomic.
class LdmStore {
 public:
  UpsertResult upsert(const LdmEntry& entry);

  std::vector<LdmEntry> all() const;
  std::optional<LdmEntry> find(uint32_t station_id) const;
  /// Entries with haversineDistance(center, position) <= radius_m, sorted by station id.
  std::vector<LdmEntry> queryArea(const GeoPosition& center, double radius_m) const;

  /// Drops entries with now_ms - last_update_ms > max_age_ms.
  size_t purgeExpired(int64_t now_ms, const LdmConfig& cfg);

  size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<uint32_t, LdmEntry> entries_;
};

using Clock = std::function<int64_t()>;

/// Milliseconds since the Unix epoch from the system clock.
int64_t systemClockMs();

/// Periodically purges expired entries on its own thread.
class LdmSweeper {
 public:
  LdmSweeper(LdmStore& store, LdmConfig cfg, Clock clock);
  ~LdmSweeper();

  LdmSweeper(const LdmSweeper&) = delete;
  LdmSweeper& operator=(const LdmSweeper&) = delete;

  void stop();
  uint64_t sweepCount() const { return sweeps_.load(); }

 private:
  void run(std::stop_token token);

  LdmStore& store_;
  LdmConfig cfg_;
  Clock clock_;
  std::atomic<uint64_t> sweeps_{0};
  std::mutex mutex_;
  std::condition_variable_any cv_;
  std::jthread thread_;
};

/// Answers one newline-delimited JSON request line against the store.
std::string handleLdmRequest(const std::string& line, const LdmStore& store, int64_t now_ms);

/// TCP server for the LDM query API. One thread accepts, one thread per
/// connection processes requests sequentially.
class LdmApiServer {
 public:
  LdmApiServer(const LdmStore& store, uint16_t port, Clock clock);
  ~LdmApiServer();

  LdmApiServer(const LdmApiServer&) = delete;
  LdmApiServer& operator=(const LdmApiServer&) = delete;

  uint16_t port() const { return port_; }
  void stop();

 private:
  void acceptLoop();
  void serveConnection(int fd);

  const LdmStore& store_;
  Clock clock_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex conn_mutex_;
  std::vector<int> conn_fds_;
  std::vector<std::jthread> conn_threads_;
  std::jthread accept_thread_;
};

}  // namespace citsbed
