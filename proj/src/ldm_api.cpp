#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "citsbed/ldm.hpp"
#include "citsbed/net.hpp"

namespace citsbed {

namespace {

using nlohmann::json;

json errorResponse(const std::string& code) { return {{"ok", false}, {"error", code}}; }

json objectsResponse(const std::vector<LdmEntry>& entries, int64_t now_ms) {
  json objects = json::array();
  for (const auto& e : entries) {
    objects.push_back({{"station_id", e.station_id},
                       {"lat", e.position.latitudeDeg()},
                       {"lon", e.position.longitudeDeg()},
                       {"speed_mps", e.speed_mps},
                       {"heading_deg", e.heading_deg},
                       {"age_ms", now_ms - e.last_update_ms}});
  }
  return {{"ok", true}, {"objects", std::move(objects)}};
}

json dispatch(const json& req, const LdmStore& store, int64_t now_ms) {
  if (!req.is_object() || !req.contains("op") || !req["op"].is_string()) {
    return errorResponse("bad_request");
  }
  const std::string op = req["op"].get<std::string>();
  if (op == "all") return objectsResponse(store.all(), now_ms);
  if (op == "id") {
    if (!req.contains("station_id") || !req["station_id"].is_number_unsigned() ||
        req["station_id"].get<uint64_t>() > 0xFFFFFFFFu) {
      return errorResponse("bad_request");
    }
    std::vector<LdmEntry> found;
    if (auto e = store.find(req["station_id"].get<uint32_t>())) found.push_back(*e);
    return objectsResponse(found, now_ms);
  }
  if (op == "area") {
    for (const char* key : {"lat", "lon", "radius_m"}) {
      if (!req.contains(key) || !req[key].is_number()) return errorResponse("bad_request");
    }
    const double radius = req["radius_m"].get<double>();
    if (!(radius >= 0.0)) return errorResponse("bad_request");
    try {
      GeoPosition center(req["lat"].get<double>(), req["lon"].get<double>());
      return objectsResponse(store.queryArea(center, radius), now_ms);
    } catch (const std::invalid_argument&) {
      return errorResponse("bad_request");
    }
  }
  return errorResponse("unknown_op");
}

}  // namespace

std::string handleLdmRequest(const std::string& line, const LdmStore& store, int64_t now_ms) {
  json req = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (req.is_discarded()) return errorResponse("parse").dump();
  return dispatch(req, store, now_ms).dump();
}

LdmApiServer::LdmApiServer(const LdmStore& store, uint16_t port, Clock clock)
    : store_(store), clock_(std::move(clock)) {
  net::Socket s = net::listenTcp(port);
  port_ = net::localPort(s);
  listen_fd_ = s.release();
  accept_thread_ = std::jthread([this] { acceptLoop(); });
}

LdmApiServer::~LdmApiServer() { stop(); }

void LdmApiServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  net::Socket(listen_fd_).close();
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : conn_threads_) {
    if (t.joinable()) t.join();
  }
}

void LdmApiServer::acceptLoop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      continue;
    }
    std::lock_guard lock(conn_mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    conn_fds_.push_back(fd);
    conn_threads_.emplace_back([this, fd] { serveConnection(fd); });
  }
}

void LdmApiServer::serveConnection(int fd) {
  net::LineReader reader(fd);
  while (auto line = reader.next()) {
    if (line->empty()) continue;
    if (!net::sendAll(fd, handleLdmRequest(*line, store_, clock_()) + "\n")) break;
  }
  std::lock_guard lock(conn_mutex_);
  std::erase(conn_fds_, fd);
  ::close(fd);
}

}  // namespace citsbed
