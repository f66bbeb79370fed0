#include "citsbed/station.hpp"

#include <chrono>
#include <stdexcept>

#include "config_yaml.hpp"

namespace citsbed {

namespace {

constexpr auto kRxPollTimeout = std::chrono::milliseconds(100);

double fromTenthMicroDeg(int32_t v) { return v * 1e-7; }

}  // namespace

void StationConfig::validate() const {
  trigger.validate();
  ldm.validate();
  if (check_period_ms <= 0) throw std::invalid_argument("check_period_ms must be positive");
  if (gnss_queue_capacity == 0) throw std::invalid_argument("gnss queue capacity must be positive");
}

StationFile loadStationConfig(const std::string& path) {
  using namespace yamlcfg;
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ScenarioError("cannot read station config " + path + ": " + e.what());
  }
  StationFile f;
  auto& st = f.station;
  st.station_id = get<uint32_t>(root, "station_id", st.station_id);
  const int type = get<int>(root, "station_type", st.station_type);
  if (type < 0 || type > 255) throw ScenarioError("station_type out of range");
  st.station_type = static_cast<uint8_t>(type);
  st.tx_power_dbm = get(root, "tx_power_dbm", st.tx_power_dbm);
  st.check_period_ms = get<int64_t>(root, "check_period_ms", st.check_period_ms);
  st.trigger = parseTrigger(root["trigger"], st.trigger);
  if (root["forced_period_ms"]) st.trigger.forced_period_ms = get<int64_t>(root, "forced_period_ms", 0);
  if (const auto ldm = root["ldm"]) {
    st.ldm.max_age_ms = get<int64_t>(ldm, "max_age_ms", st.ldm.max_age_ms);
    st.ldm.sweep_period_ms = get<int64_t>(ldm, "sweep_period_ms", st.ldm.sweep_period_ms);
    const int port = get<int>(ldm, "api_port", st.ldm.api_listen_port);
    if (port < 0 || port > 65535) throw ScenarioError("ldm.api_port out of range");
    st.ldm.api_listen_port = static_cast<uint16_t>(port);
  }
  if (const auto ch = root["channel"]) parseChannel(ch, f.link, f.model);
  f.link.tx_power_dbm = st.tx_power_dbm;
  try {
    st.validate();
    f.link.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return f;
}

StationRuntime::StationRuntime(StationConfig cfg, std::shared_ptr<Transport> transport, Clock clock,
                               EventSink sink)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      sink_(std::move(sink)),
      cam_service_(cfg_.station_id, cfg_.station_type, cfg_.trigger),
      gnss_queue_(cfg_.gnss_queue_capacity) {
  cfg_.validate();
  if (!transport_) throw std::invalid_argument("station needs a transport");
  if (!clock_) clock_ = systemClockMs;
}

StationRuntime::~StationRuntime() { stop(); }

void StationRuntime::start() {
  if (started_) return;
  if (cfg_.ldm_api) api_ = std::make_unique<LdmApiServer>(ldm_, cfg_.ldm.api_listen_port, clock_);
  sweeper_ = std::make_unique<LdmSweeper>(ldm_, cfg_.ldm, clock_);
  gnss_thread_ = std::jthread([this](std::stop_token t) { gnssLoop(t); });
  rx_thread_ = std::jthread([this](std::stop_token t) { rxLoop(t); });
  tx_thread_ = std::jthread([this](std::stop_token t) { txLoop(t); });
  started_ = true;
}

void StationRuntime::stop() {
  if (!started_) return;
  started_ = false;
  gnss_queue_.close();
  tx_thread_.request_stop();
  rx_thread_.request_stop();
  gnss_thread_.request_stop();
  if (tx_thread_.joinable()) tx_thread_.join();
  if (rx_thread_.joinable()) rx_thread_.join();
  if (gnss_thread_.joinable()) gnss_thread_.join();
  transport_->close();
  if (sweeper_) sweeper_->stop();
  if (api_) api_->stop();
}

bool StationRuntime::submitFix(const FixUpdate& fix) { return gnss_queue_.push(fix); }

bool StationRuntime::submitState(const KinematicState& state) {
  FixUpdate fix;
  fix.position = state.position;
  fix.speed_mps = state.speed_mps;
  fix.heading_deg = state.heading_deg;
  fix.fix_time_ms = state.timestamp_ms;
  fix.valid = true;
  return submitFix(fix);
}

std::optional<uint16_t> StationRuntime::ldmApiPort() const {
  if (!api_) return std::nullopt;
  return api_->port();
}

std::optional<KinematicState> StationRuntime::latestState() const {
  std::lock_guard lock(state_mutex_);
  return latest_;
}

void StationRuntime::gnssLoop(std::stop_token token) {
  while (!token.stop_requested()) {
    auto fix = gnss_queue_.pop(std::chrono::milliseconds(100));
    if (!fix) {
      if (gnss_queue_.closed()) return;
      continue;
    }
    std::lock_guard lock(state_mutex_);
    if (!fix->valid) {
      // losing the fix stops CAM generation until a valid one returns
      latest_.reset();
      continue;
    }
    KinematicState s;
    s.position = fix->position;
    s.speed_mps = fix->speed_mps.value_or(0.0);
    // no course over ground: keep the last known heading
    s.heading_deg = fix->heading_deg.value_or(latest_ ? latest_->heading_deg : 0.0);
    s.timestamp_ms = fix->fix_time_ms;
    latest_ = s;
    transport_->updatePosition(s.position);
  }
}

void StationRuntime::txLoop(std::stop_token token) {
  using namespace std::chrono;
  const auto period = milliseconds(cfg_.check_period_ms);
  auto next = steady_clock::now();
  while (!token.stop_requested()) {
    next += period;
    if (auto state = latestState()) {
      const int64_t now = clock_();
      state->timestamp_ms = now;
      if (auto cam = cam_service_.poll(*state)) {
        Frame frame;
        frame.source_station_id = cfg_.station_id;
        frame.source_lat_tenth_udeg = cam->latitude_tenth_udeg;
        frame.source_lon_tenth_udeg = cam->longitude_tenth_udeg;
        frame.timestamp_ms = static_cast<uint32_t>(now);
        frame.btp_dest_port = kBtpPortCam;
        frame.payload = encodeCam(*cam);
        transport_->send(encodeFrame(frame));
        ++tx_count_;
        if (sink_) {
          ScenarioEvent e;
          e.time_ms = now;
          e.type = EventType::Tx;
          e.sender_id = cfg_.station_id;
          e.tx_lat = fromTenthMicroDeg(cam->latitude_tenth_udeg);
          e.tx_lon = fromTenthMicroDeg(cam->longitude_tenth_udeg);
          sink_(e);
        }
      }
    }
    // absolute deadlines keep the cadence from drifting with processing time
    std::this_thread::sleep_until(next);
    if (steady_clock::now() > next + period) next = steady_clock::now();
  }
}

void StationRuntime::rxLoop(std::stop_token token) {
  while (!token.stop_requested()) {
    auto rx = transport_->receive(kRxPollTimeout);
    if (rx) handleFrame(*rx);
  }
}

void StationRuntime::handleFrame(const ReceivedFrame& rx) {
  Frame frame;
  try {
    frame = decodeFrame(rx.bytes);
  } catch (const CodecError&) {
    ++dropped_;
    return;
  }
  // multicast loopback hands our own frames back
  if (frame.source_station_id == cfg_.station_id) return;
  const int64_t now = clock_();

  if (frame.btp_dest_port != kBtpPortCam) {
    LdmEntry entry;
    entry.station_id = frame.source_station_id;
    entry.kind = LdmEntryKind::Opaque;
    try {
      entry.position = GeoPosition(fromTenthMicroDeg(frame.source_lat_tenth_udeg),
                                   fromTenthMicroDeg(frame.source_lon_tenth_udeg));
    } catch (const std::invalid_argument&) {
      ++dropped_;
      return;
    }
    entry.last_update_ms = now;
    ldm_.upsert(entry);
    ++opaque_count_;
    return;
  }

  CamPayload cam;
  try {
    cam = decodeCam(frame.payload);
  } catch (const CodecError&) {
    ++dropped_;
    return;
  }
  LdmEntry entry;
  entry.station_id = cam.station_id;
  entry.kind = LdmEntryKind::Cam;
  entry.position = GeoPosition(fromTenthMicroDeg(cam.latitude_tenth_udeg),
                               fromTenthMicroDeg(cam.longitude_tenth_udeg), cam.altitude_cm / 100.0);
  entry.speed_mps = cam.speed_cmps / 100.0;
  entry.heading_deg = cam.heading_tenth_deg / 10.0;
  entry.last_update_ms = now;
  entry.raw_generation_delta_time = cam.generation_delta_time;
  ldm_.upsert(entry);
  ++rx_count_;

  if (sink_) {
    ScenarioEvent e;
    e.time_ms = now;
    e.type = EventType::Rx;
    e.sender_id = cam.station_id;
    e.receiver_id = cfg_.station_id;
    e.tx_lat = entry.position.latitudeDeg();
    e.tx_lon = entry.position.longitudeDeg();
    if (auto own = latestState()) {
      e.rx_lat = own->position.latitudeDeg();
      e.rx_lon = own->position.longitudeDeg();
    }
    e.p_rx_dbm = rx.p_rx_dbm;
    sink_(e);
  }
}

}  // namespace citsbed
