#include "citsbed/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <queue>
#include <set>

#include "citsbed/codec.hpp"
#include "config_yaml.hpp"

namespace citsbed {

namespace {

using namespace yamlcfg;

ScenarioStation parseStation(const YAML::Node& node, const std::filesystem::path& base_dir) {
  ScenarioStation st;
  if (!node["id"]) throw ScenarioError("station without id");
  st.id = get<uint32_t>(node, "id", 0);
  const std::string role = get<std::string>(node, "role", "obu");
  if (role == "obu") {
    st.role = StationRole::Obu;
  } else if (role == "rsu") {
    st.role = StationRole::Rsu;
    st.station_type = 15;
  } else {
    throw ScenarioError("station " + std::to_string(st.id) + ": unknown role '" + role + "'");
  }
  const int station_type = get<int>(node, "station_type", st.station_type);
  if (station_type < 0 || station_type > 255) {
    throw ScenarioError("station " + std::to_string(st.id) + ": station_type out of range");
  }
  st.station_type = static_cast<uint8_t>(station_type);
  st.tx_power_dbm = get(node, "tx_power_dbm", st.tx_power_dbm);
  st.transmit = get(node, "transmit", st.transmit);
  st.trigger = parseTrigger(node["trigger"], st.trigger);
  if (node["forced_period_ms"]) st.trigger.forced_period_ms = get<int64_t>(node, "forced_period_ms", 0);

  if (const auto pos = node["position"]) {
    try {
      st.static_position = GeoPosition(get(pos, "lat", 0.0), get(pos, "lon", 0.0), get(pos, "alt", 0.0));
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("station " + std::to_string(st.id) + ": " + e.what());
    }
  }
  if (node["trace"]) {
    std::filesystem::path p = get<std::string>(node, "trace", "");
    if (p.is_relative()) p = base_dir / p;
    st.trace_path = p.string();
    if (!std::filesystem::exists(p)) {
      throw ScenarioError("station " + std::to_string(st.id) + ": trace file not found: " + st.trace_path);
    }
    try {
      st.trace = loadTrace(st.trace_path);
    } catch (const GnssParseError& e) {
      throw ScenarioError(e.what());
    }
  }
  return st;
}

// Scheduled per-station CAM check. Ties break on insertion order.
struct TimedEvent {
  int64_t time_ms;
  uint64_t seq;
  size_t station;
  bool operator>(const TimedEvent& o) const {
    return time_ms != o.time_ms ? time_ms > o.time_ms : seq > o.seq;
  }
};

KinematicState stationState(const ScenarioStation& st, int64_t t_ms) {
  KinematicState s;
  if (st.trace) {
    s = sampleTraceHold(*st.trace, t_ms);
  } else {
    s.position = *st.static_position;
  }
  s.timestamp_ms = t_ms;
  return s;
}

void appendOptional(std::string& out, const std::optional<double>& v, const char* fmt) {
  out.push_back(',');
  if (v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), fmt, *v);
    out += buf;
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  if (stations.empty()) throw ScenarioError("scenario needs at least one station");
  if (duration_ms <= 0) throw ScenarioError("duration must be positive");
  if (check_period_ms <= 0) throw ScenarioError("check_period_ms must be positive");
  std::set<uint32_t> ids;
  for (const auto& st : stations) {
    const std::string who = "station " + std::to_string(st.id);
    if (!ids.insert(st.id).second) throw ScenarioError("duplicate " + who);
    if (st.static_position.has_value() == st.trace.has_value()) {
      throw ScenarioError(who + ": exactly one of position or trace is required");
    }
    if (st.trace && st.trace->empty()) throw ScenarioError(who + ": trace is empty");
    try {
      st.trigger.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(who + ": " + e.what());
    }
  }
  try {
    link.validate();
    citsbed::validate(model);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("channel: ") + e.what());
  }
}

ScenarioConfig loadScenarioConfig(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ScenarioError("cannot read scenario " + path + ": " + e.what());
  }
  const auto base_dir = std::filesystem::path(path).parent_path();
  ScenarioConfig cfg;
  cfg.duration_ms = static_cast<int64_t>(yamlcfg::get(root, "duration_s", 10.0) * 1000.0);
  cfg.start_ms = yamlcfg::get<int64_t>(root, "start_ms", 0);
  cfg.check_period_ms = yamlcfg::get<int64_t>(root, "check_period_ms", cfg.check_period_ms);

  if (const auto ch = root["channel"]) yamlcfg::parseChannel(ch, cfg.link, cfg.model);
  const auto stations = root["stations"];
  if (!stations || !stations.IsSequence()) throw ScenarioError("scenario needs a 'stations' list");
  for (const auto& node : stations) cfg.stations.push_back(parseStation(node, base_dir));
  cfg.validate();
  return cfg;
}

std::vector<ScenarioEvent> runScenario(const ScenarioConfig& cfg) {
  cfg.validate();

  // stations in id order so event ordering does not depend on file order
  std::vector<const ScenarioStation*> stations;
  for (const auto& st : cfg.stations) stations.push_back(&st);
  std::sort(stations.begin(), stations.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<CamService> services;
  for (const auto* st : stations) services.emplace_back(st->id, st->station_type, st->trigger);

  ShadowingSource shadowing(cfg.link.shadowing_sigma_db, cfg.link.rng_seed);
  std::priority_queue<TimedEvent, std::vector<TimedEvent>, std::greater<>> queue;
  uint64_t seq = 0;
  for (size_t i = 0; i < stations.size(); ++i) {
    if (stations[i]->transmit) queue.push({cfg.start_ms, seq++, i});
  }

  std::vector<ScenarioEvent> log;
  const int64_t end_ms = cfg.start_ms + cfg.duration_ms;
  while (!queue.empty()) {
    const TimedEvent ev = queue.top();
    queue.pop();
    if (ev.time_ms >= end_ms) continue;
    queue.push({ev.time_ms + cfg.check_period_ms, seq++, ev.station});

    const ScenarioStation& tx = *stations[ev.station];
    const KinematicState tx_state = stationState(tx, ev.time_ms);
    auto cam = services[ev.station].poll(tx_state);
    if (!cam) continue;

    Frame frame;
    frame.source_station_id = tx.id;
    frame.source_lat_tenth_udeg = cam->latitude_tenth_udeg;
    frame.source_lon_tenth_udeg = cam->longitude_tenth_udeg;
    frame.timestamp_ms = static_cast<uint32_t>(ev.time_ms);
    frame.btp_dest_port = kBtpPortCam;
    frame.payload = encodeCam(*cam);
    const Bytes on_air = encodeFrame(frame);

    ScenarioEvent tx_event;
    tx_event.time_ms = ev.time_ms;
    tx_event.type = EventType::Tx;
    tx_event.sender_id = tx.id;
    tx_event.tx_lat = cam->latitude_tenth_udeg * 1e-7;
    tx_event.tx_lon = cam->longitude_tenth_udeg * 1e-7;
    log.push_back(tx_event);

    LinkBudgetConfig link = cfg.link;
    link.tx_power_dbm = tx.tx_power_dbm;
    for (size_t j = 0; j < stations.size(); ++j) {
      if (j == ev.station) continue;
      const ScenarioStation& rx = *stations[j];
      const KinematicState rx_state = stationState(rx, ev.time_ms);
      const double d = std::max(kMinLinkDistanceM, haversineDistance(tx_state.position, rx_state.position));
      const PowerDbm p_rx = receivedPowerDbm(d, link, cfg.model, shadowing.draw());
      if (receptionDecision(p_rx, link) == Reception::Lost) continue;

      const Frame received = decodeFrame(on_air);
      const CamPayload rx_cam = decodeCam(received.payload);
      ScenarioEvent rx_event;
      rx_event.time_ms = ev.time_ms;
      rx_event.type = EventType::Rx;
      rx_event.sender_id = rx_cam.station_id;
      rx_event.receiver_id = rx.id;
      rx_event.tx_lat = rx_cam.latitude_tenth_udeg * 1e-7;
      rx_event.tx_lon = rx_cam.longitude_tenth_udeg * 1e-7;
      rx_event.rx_lat = rx_state.position.latitudeDeg();
      rx_event.rx_lon = rx_state.position.longitudeDeg();
      rx_event.p_rx_dbm = p_rx.value;
      log.push_back(rx_event);
    }
  }
  return log;
}

std::string formatEventRow(const ScenarioEvent& e) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld,%s,%u,", static_cast<long long>(e.time_ms),
                e.type == EventType::Tx ? "TX" : "RX", e.sender_id);
  std::string row = buf;
  if (e.receiver_id) row += std::to_string(*e.receiver_id);
  std::snprintf(buf, sizeof(buf), ",%.7f,%.7f", e.tx_lat, e.tx_lon);
  row += buf;
  appendOptional(row, e.rx_lat, "%.7f");
  appendOptional(row, e.rx_lon, "%.7f");
  appendOptional(row, e.p_rx_dbm, "%.3f");
  return row;
}

void writeEventLog(std::ostream& out, const std::vector<ScenarioEvent>& events) {
  out << kEventLogHeader << '\n';
  for (const auto& e : events) out << formatEventRow(e) << '\n';
}

}  // namespace citsbed
