#include "citsbed/trial.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "citsbed/rfanalysis.hpp"

namespace citsbed {

namespace {

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
std::optional<T> number(const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

int64_t floorDiv(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

GeoPosition meanPosition(std::span<const GeoPosition> positions) {
  double lat = 0.0, lon = 0.0;
  for (const auto& p : positions) {
    lat += p.latitudeDeg();
    lon += p.longitudeDeg();
  }
  const double n = static_cast<double>(positions.size());
  return GeoPosition(std::clamp(lat / n, -90.0, 90.0), std::clamp(lon / n, -180.0, 180.0));
}

std::string hexColor(int r, int g, int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

// Stable, well-spread colour per sender id.
std::string senderColor(uint32_t id) {
  const double hue = std::fmod(static_cast<double>(id) * 137.508, 360.0);
  const double s = 0.65, v = 0.9;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(hue / 60.0, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  auto to8 = [&](double ch) { return static_cast<int>(std::lround((ch + m) * 255.0)); };
  return hexColor(to8(r), to8(g), to8(b));
}

nlohmann::json pointGeometry(const GeoPosition& p) {
  return {{"type", "Point"}, {"coordinates", {p.longitudeDeg(), p.latitudeDeg()}}};
}

nlohmann::json featureCollection(nlohmann::json features) {
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace

std::vector<RxLogRecord> parseRxLog(std::istream& in, const std::string& name,
                                    std::optional<uint32_t> receiver_id) {
  std::vector<RxLogRecord> records;
  std::string line;
  size_t offset = 0;
  while (std::getline(in, line)) {
    const size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.starts_with("time_ms") || line.starts_with("rx_time_ms")) {
      continue;
    }
    auto f = splitCsv(line);
    auto fail = [&](const std::string& why) { return FormatError(name, line_offset, why); };

    // scenario event log: time_ms,event,sender_id,receiver_id,tx_lat,tx_lon,rx_lat,rx_lon,p_rx_dbm
    if (f.size() == 9 && (f[1] == "TX" || f[1] == "RX")) {
      // a live receiver without a fix logs its RX rows with no position
      if (f[1] == "TX" || f[6].empty() || f[7].empty()) continue;
      if (receiver_id) {
        auto rid = number<uint32_t>(f[3]);
        if (!rid) throw fail("invalid receiver_id '" + f[3] + "'");
        if (*rid != *receiver_id) continue;
      }
      f.erase(f.begin() + 3);
      f.erase(f.begin() + 1);
    }
    if (f.size() != 6 && f.size() != 7) {
      throw fail("expected 6 or 7 columns, got " + std::to_string(f.size()));
    }
    RxLogRecord r;
    auto t = number<int64_t>(f[0]);
    auto id = number<uint32_t>(f[1]);
    auto tx_lat = number<double>(f[2]);
    auto tx_lon = number<double>(f[3]);
    auto rx_lat = number<double>(f[4]);
    auto rx_lon = number<double>(f[5]);
    if (!t || !id || !tx_lat || !tx_lon || !rx_lat || !rx_lon) throw fail("non-numeric field");
    try {
      r.tx_position = GeoPosition(*tx_lat, *tx_lon);
      r.rx_position = GeoPosition(*rx_lat, *rx_lon);
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
    r.rx_time_ms = *t;
    r.sender_id = *id;
    if (f.size() == 7 && !f[6].empty()) {
      r.p_rx_dbm = number<double>(f[6]);
      if (!r.p_rx_dbm) throw fail("invalid p_rx_dbm '" + f[6] + "'");
    }
    if (!records.empty() && r.rx_time_ms < records.back().rx_time_ms) {
      throw fail("rx_time_ms goes backwards");
    }
    records.push_back(r);
  }
  return records;
}

std::vector<RxLogRecord> loadRxLog(const std::string& path, std::optional<uint32_t> receiver_id) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return parseRxLog(in, path, receiver_id);
}

std::vector<SenderCluster> clusterBySender(std::span<const RxLogRecord> records, size_t group_size) {
  if (group_size == 0) throw std::invalid_argument("group size must be at least 1");
  std::map<uint32_t, std::vector<const RxLogRecord*>> by_sender;
  for (const auto& r : records) by_sender[r.sender_id].push_back(&r);

  std::vector<SenderCluster> clusters;
  for (const auto& [id, msgs] : by_sender) {
    for (size_t start = 0; start + group_size <= msgs.size(); start += group_size) {
      std::vector<GeoPosition> positions;
      for (size_t i = start; i < start + group_size; ++i) positions.push_back(msgs[i]->tx_position);
      SenderCluster c;
      c.sender_id = id;
      c.mean_position = meanPosition(positions);
      c.first_flag = start == 0;
      c.first_rx_time_ms = msgs[start]->rx_time_ms;
      c.size = group_size;
      clusters.push_back(c);
    }
  }
  return clusters;
}

std::vector<PdrWindow> windowPdr(std::span<const RxLogRecord> records, const PdrOptions& options) {
  if (options.tx_period_ms <= 0 || options.window_ms <= 0 || options.window_ms % options.tx_period_ms != 0) {
    throw std::invalid_argument("tx period must be positive and divide the window");
  }
  const Trace* trace = options.receiver_trace && !options.receiver_trace->empty() ? options.receiver_trace : nullptr;
  if (records.empty() && !trace) return {};

  int64_t first = std::numeric_limits<int64_t>::max();
  int64_t last = std::numeric_limits<int64_t>::min();
  for (const auto& r : records) {
    first = std::min(first, r.rx_time_ms);
    last = std::max(last, r.rx_time_ms);
  }
  if (trace) {
    if (records.empty()) first = trace->front().timestamp_ms;
    last = std::max(last, trace->back().timestamp_ms);
  }
  const int64_t w = options.window_ms;
  const int64_t anchor = floorDiv(first, w) * w;
  const auto count = static_cast<size_t>(floorDiv(last - anchor, w) + 1);

  std::vector<std::vector<GeoPosition>> positions(count);
  for (const auto& r : records) {
    positions[static_cast<size_t>(floorDiv(r.rx_time_ms - anchor, w))].push_back(r.rx_position);
  }

  std::vector<PdrWindow> windows(count);
  for (size_t k = 0; k < count; ++k) {
    PdrWindow& win = windows[k];
    win.window_start_ms = anchor + static_cast<int64_t>(k) * w;
    win.expected_count = static_cast<int>(w / options.tx_period_ms);
    win.received_count = static_cast<int>(positions[k].size());
    if (!positions[k].empty()) {
      win.mean_rx_position = meanPosition(positions[k]);
    } else if (trace) {
      win.mean_rx_position = interpolateTracePosition(*trace, win.window_start_ms + w / 2);
    }
    if (win.mean_rx_position) win.distance_m = haversineDistance(*win.mean_rx_position, options.tx_position);
  }
  return windows;
}

RangeEstimate estimateRange(std::span<const PdrWindow> windows) {
  RangeEstimate est;
  bool any = false;
  std::map<int64_t, std::pair<double, size_t>> bins;
  for (const auto& w : windows) {
    if (!w.distance_m) continue;
    if (w.received_count >= 1) {
      est.max_rx_distance_m = any ? std::max(est.max_rx_distance_m, *w.distance_m) : *w.distance_m;
      any = true;
    }
    const auto bin = static_cast<int64_t>(std::floor(*w.distance_m / kRangeBinWidthM));
    const double pdr = w.expected_count > 0 ? static_cast<double>(w.received_count) / w.expected_count : 0.0;
    bins[bin].first += pdr;
    bins[bin].second += 1;
  }
  if (!any) throw std::invalid_argument("no window with a known distance received any message");
  for (const auto& [bin, acc] : bins) {
    est.distance_pdr_curve.push_back(
        {static_cast<double>(bin) * kRangeBinWidthM, acc.first / static_cast<double>(acc.second), acc.second});
  }
  return est;
}

std::string pdrColor(int received, int max_count) {
  const double frac = max_count > 0 ? std::clamp(static_cast<double>(received) / max_count, 0.0, 1.0) : 0.0;
  return hexColor(0, static_cast<int>(std::lround(frac * 0x64)), 0);
}

nlohmann::json emitGeoJson(std::span<const SenderCluster> clusters) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : clusters) {
    features.push_back({{"type", "Feature"},
                        {"geometry", pointGeometry(c.mean_position)},
                        {"properties",
                         {{"sender_id", c.sender_id},
                          {"first_flag", c.first_flag},
                          {"messages", c.size},
                          {"first_rx_time_ms", c.first_rx_time_ms},
                          {"color", c.first_flag ? "#ff0000" : senderColor(c.sender_id)}}}});
  }
  return featureCollection(std::move(features));
}

nlohmann::json emitGeoJson(std::span<const PdrWindow> windows) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& w : windows) {
    nlohmann::json props = {{"window_start_ms", w.window_start_ms},
                            {"received_count", w.received_count},
                            {"expected_count", w.expected_count},
                            {"color", pdrColor(w.received_count, w.expected_count)}};
    props["distance_m"] = w.distance_m ? nlohmann::json(*w.distance_m) : nlohmann::json(nullptr);
    features.push_back({{"type", "Feature"},
                        {"geometry", w.mean_rx_position ? pointGeometry(*w.mean_rx_position) : nlohmann::json(nullptr)},
                        {"properties", std::move(props)}});
  }
  return featureCollection(std::move(features));
}

void writeWindowsCsv(std::ostream& out, std::span<const PdrWindow> windows) {
  out << "window_start_ms,received_count,expected_count,mean_rx_lat,mean_rx_lon,distance_m\n";
  char buf[128];
  for (const auto& w : windows) {
    out << w.window_start_ms << ',' << w.received_count << ',' << w.expected_count << ',';
    if (w.mean_rx_position) {
      std::snprintf(buf, sizeof(buf), "%.7f,%.7f", w.mean_rx_position->latitudeDeg(),
                    w.mean_rx_position->longitudeDeg());
      out << buf;
    } else {
      out << ',';
    }
    out << ',';
    if (w.distance_m) {
      std::snprintf(buf, sizeof(buf), "%.2f", *w.distance_m);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace citsbed
