#include "citsbed/gnss.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <json.hpp>

#include "citsbed/net.hpp"

namespace citsbed {

namespace {

std::vector<std::string_view> splitFields(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> toDouble(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> toInt(std::string_view s) {
  s = trim(s);
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

double requireDouble(std::string_view s, const char* what) {
  auto v = toDouble(s);
  if (!v) throw GnssParseError(std::string("invalid ") + what + " '" + std::string(s) + "'");
  return *v;
}

int hexDigit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

uint8_t nmeaXor(std::string_view body) {
  uint8_t x = 0;
  for (char c : body) x ^= static_cast<uint8_t>(c);
  return x;
}

// Checksum-verified fields of an NMEA sentence, type name first.
std::vector<std::string_view> sentenceFields(std::string_view line, std::string_view type) {
  line = trim(line);
  if (!validateNmeaChecksum(line)) throw GnssParseError("bad NMEA checksum");
  const std::string_view body = line.substr(1, line.find('*') - 1);
  auto fields = splitFields(body, ',');
  if (fields[0].size() != 5 || fields[0].substr(2) != type) {
    throw GnssParseError("expected " + std::string(type) + " sentence, got '" +
                         std::string(fields[0]) + "'");
  }
  return fields;
}

// hhmmss[.sss] to milliseconds since midnight.
int64_t parseTimeOfDay(std::string_view s) {
  if (s.size() < 6) throw GnssParseError("invalid NMEA time '" + std::string(s) + "'");
  auto hh = toInt<int>(s.substr(0, 2));
  auto mm = toInt<int>(s.substr(2, 2));
  auto ss = toDouble(s.substr(4));
  if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss >= 61.0 || *ss < 0.0) {
    throw GnssParseError("invalid NMEA time '" + std::string(s) + "'");
  }
  return (*hh * 3600LL + *mm * 60LL) * 1000LL + std::llround(*ss * 1000.0);
}

int64_t daysFromCivil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

// ddmmyy to epoch milliseconds at midnight UTC.
int64_t parseDate(std::string_view s) {
  if (s.size() != 6) throw GnssParseError("invalid NMEA date '" + std::string(s) + "'");
  auto dd = toInt<unsigned>(s.substr(0, 2));
  auto mo = toInt<unsigned>(s.substr(2, 2));
  auto yy = toInt<int>(s.substr(4, 2));
  if (!dd || !mo || !yy || *dd < 1 || *dd > 31 || *mo < 1 || *mo > 12) {
    throw GnssParseError("invalid NMEA date '" + std::string(s) + "'");
  }
  const int year = *yy >= 80 ? 1900 + *yy : 2000 + *yy;
  return daysFromCivil(year, *mo, *dd) * 86400000LL;
}

GeoPosition makePosition(double lat, double lon, double alt = 0.0) {
  try {
    return GeoPosition(lat, lon, alt);
  } catch (const std::invalid_argument& e) {
    throw GnssParseError(e.what());
  }
}

}  // namespace

bool validateNmeaChecksum(std::string_view line) {
  line = trim(line);
  if (line.size() < 4 || line.front() != '$') return false;
  const size_t star = line.find('*');
  if (star == std::string_view::npos || star + 3 != line.size()) return false;
  const int hi = hexDigit(line[star + 1]);
  const int lo = hexDigit(line[star + 2]);
  if (hi < 0 || lo < 0) return false;
  return nmeaXor(line.substr(1, star - 1)) == static_cast<uint8_t>(hi * 16 + lo);
}

double parseNmeaCoordinate(std::string_view field, char hemisphere) {
  const double raw = requireDouble(field, "coordinate");
  if (raw < 0.0) throw GnssParseError("negative NMEA coordinate");
  const double degrees = std::floor(raw / 100.0);
  const double minutes = raw - degrees * 100.0;
  if (minutes >= 60.0) throw GnssParseError("minutes out of range in '" + std::string(field) + "'");
  const double value = degrees + minutes / 60.0;
  switch (hemisphere) {
    case 'N':
    case 'E': return value;
    case 'S':
    case 'W': return -value;
    default: throw GnssParseError(std::string("invalid hemisphere '") + hemisphere + "'");
  }
}

NmeaCoordinate formatNmeaCoordinate(double degrees, bool is_latitude) {
  NmeaCoordinate out;
  out.hemisphere = is_latitude ? (degrees < 0 ? 'S' : 'N') : (degrees < 0 ? 'W' : 'E');
  // integer micro-minutes so rounding carries into the degree digits
  const auto micro_minutes = static_cast<int64_t>(std::llround(std::fabs(degrees) * 60.0 * 1e6));
  const int64_t deg = micro_minutes / 60000000LL;
  const int64_t rem = micro_minutes % 60000000LL;
  char buf[32];
  std::snprintf(buf, sizeof(buf), is_latitude ? "%02lld%02lld.%06lld" : "%03lld%02lld.%06lld",
                static_cast<long long>(deg), static_cast<long long>(rem / 1000000LL),
                static_cast<long long>(rem % 1000000LL));
  out.field = buf;
  return out;
}

FixUpdate parseNmeaRmc(std::string_view line) {
  const auto f = sentenceFields(line, "RMC");
  // 12 fields up to NMEA 2.2, plus mode (2.3) and navigational status (4.1)
  if (f.size() < 12 || f.size() > 14) {
    throw GnssParseError("RMC field count " + std::to_string(f.size()) + " not in [12, 14]");
  }
  FixUpdate fix;
  const std::string_view status = trim(f[2]);
  fix.valid = status == "A";
  if (!fix.valid && status != "V") throw GnssParseError("invalid RMC status '" + std::string(status) + "'");

  int64_t t = f[1].empty() ? 0 : parseTimeOfDay(f[1]);
  if (!f[9].empty()) t += parseDate(f[9]);
  fix.fix_time_ms = t;

  if (!fix.valid) return fix;
  if (f[4].size() != 1 || f[6].size() != 1) throw GnssParseError("missing RMC hemisphere");
  fix.position = makePosition(parseNmeaCoordinate(f[3], f[4][0]), parseNmeaCoordinate(f[5], f[6][0]));
  if (auto knots = toDouble(f[7])) fix.speed_mps = *knots * kKnotsToMps;
  if (auto course = toDouble(f[8])) fix.heading_deg = normalizeHeadingDeg(*course);
  return fix;
}

GgaFix parseNmeaGga(std::string_view line) {
  const auto f = sentenceFields(line, "GGA");
  if (f.size() != 15) throw GnssParseError("GGA field count " + std::to_string(f.size()) + " != 15");
  GgaFix gga;
  gga.time_of_day_ms = f[1].empty() ? 0 : parseTimeOfDay(f[1]);
  gga.fix_quality = toInt<int>(f[6]).value_or(0);
  if (gga.fix_quality == 0) return gga;
  if (f[3].size() != 1 || f[5].size() != 1) throw GnssParseError("missing GGA hemisphere");
  const double alt = toDouble(f[9]).value_or(0.0);
  gga.position = makePosition(parseNmeaCoordinate(f[2], f[3][0]), parseNmeaCoordinate(f[4], f[5][0]), alt);
  return gga;
}

std::string formatNmeaRmc(const FixUpdate& fix) {
  const int64_t day_ms = ((fix.fix_time_ms % 86400000LL) + 86400000LL) % 86400000LL;
  const int64_t days = (fix.fix_time_ms - day_ms) / 86400000LL;
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  const auto lat = formatNmeaCoordinate(fix.position.latitudeDeg(), true);
  const auto lon = formatNmeaCoordinate(fix.position.longitudeDeg(), false);

  char speed[32] = "";
  char course[32] = "";
  if (fix.speed_mps) std::snprintf(speed, sizeof(speed), "%.3f", *fix.speed_mps / kKnotsToMps);
  if (fix.heading_deg) std::snprintf(course, sizeof(course), "%.2f", *fix.heading_deg);

  char body[160];
  std::snprintf(body, sizeof(body), "GPRMC,%02lld%02lld%02lld.%03lld,%c,%s,%c,%s,%c,%s,%s,%02u%02u%02d,,",
                static_cast<long long>(day_ms / 3600000), static_cast<long long>(day_ms / 60000 % 60),
                static_cast<long long>(day_ms / 1000 % 60), static_cast<long long>(day_ms % 1000),
                fix.valid ? 'A' : 'V', lat.field.c_str(), lat.hemisphere, lon.field.c_str(),
                lon.hemisphere, speed, course, static_cast<unsigned>(ymd.day()),
                static_cast<unsigned>(ymd.month()), static_cast<int>(ymd.year()) % 100);
  char out[200];
  std::snprintf(out, sizeof(out), "$%s*%02X", body, nmeaXor(body));
  return out;
}

std::vector<FixUpdate> NmeaStreamParser::feed(std::string_view bytes) {
  std::vector<FixUpdate> fixes;
  pending_.append(bytes);
  size_t start = 0;
  for (size_t nl; (nl = pending_.find('\n', start)) != std::string::npos; start = nl + 1) {
    if (auto fix = handleLine(std::string_view(pending_).substr(start, nl - start))) {
      fixes.push_back(*fix);
    }
  }
  pending_.erase(0, start);
  // a stream without newlines must not grow without bound
  if (pending_.size() > 4096) {
    pending_.clear();
    ++rejected_;
  }
  return fixes;
}

std::optional<FixUpdate> NmeaStreamParser::handleLine(std::string_view line) {
  line = trim(line);
  if (line.empty()) return std::nullopt;
  try {
    if (line.size() > 6 && line.substr(3, 3) == "GGA") {
      const GgaFix gga = parseNmeaGga(line);
      if (gga.fix_quality > 0) last_altitude_m_ = gga.position.altitudeM();
      return std::nullopt;
    }
    if (line.size() > 6 && line.substr(3, 3) == "RMC") {
      FixUpdate fix = parseNmeaRmc(line);
      if (fix.valid && last_altitude_m_) {
        fix.position = GeoPosition(fix.position.latitudeDeg(), fix.position.longitudeDeg(), *last_altitude_m_);
      }
      return fix;
    }
    // other sentence types are not used, but a corrupt one still counts
    if (!validateNmeaChecksum(line)) throw GnssParseError("bad NMEA checksum");
    return std::nullopt;
  } catch (const GnssParseError&) {
    ++rejected_;
    return std::nullopt;
  }
}

int64_t parseIso8601Ms(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.fff]Z
  auto bad = [&] { return GnssParseError("invalid ISO 8601 time '" + std::string(text) + "'"); };
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text.back() != 'Z') {
    throw bad();
  }
  auto y = toInt<int>(text.substr(0, 4));
  auto mo = toInt<unsigned>(text.substr(5, 2));
  auto d = toInt<unsigned>(text.substr(8, 2));
  auto h = toInt<int>(text.substr(11, 2));
  auto mi = toInt<int>(text.substr(14, 2));
  auto s = toDouble(text.substr(17, text.size() - 18));
  if (!y || !mo || !d || !h || !mi || !s || *mo < 1 || *mo > 12 || *d < 1 || *d > 31) throw bad();
  return daysFromCivil(*y, *mo, *d) * 86400000LL + (*h * 3600LL + *mi * 60LL) * 1000LL +
         std::llround(*s * 1000.0);
}

std::optional<FixUpdate> parseGpsdTpv(std::string_view json_line) {
  using nlohmann::json;
  json j = json::parse(json_line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw GnssParseError("malformed gpsd JSON");
  if (!j.contains("class") || j["class"] != "TPV") return std::nullopt;

  FixUpdate fix;
  const int mode = j.value("mode", 0);
  if (j.contains("time") && j["time"].is_string()) {
    fix.fix_time_ms = parseIso8601Ms(j["time"].get<std::string>());
  }
  const bool has_position = j.contains("lat") && j["lat"].is_number() && j.contains("lon") &&
                            j["lon"].is_number();
  fix.valid = mode >= 2 && has_position;
  if (!fix.valid) return fix;

  double alt = 0.0;
  for (const char* key : {"altHAE", "alt", "altMSL"}) {
    if (j.contains(key) && j[key].is_number()) {
      alt = j[key].get<double>();
      break;
    }
  }
  fix.position = makePosition(j["lat"].get<double>(), j["lon"].get<double>(), mode >= 3 ? alt : 0.0);
  if (j.contains("speed") && j["speed"].is_number()) fix.speed_mps = j["speed"].get<double>();
  if (j.contains("track") && j["track"].is_number()) {
    fix.heading_deg = normalizeHeadingDeg(j["track"].get<double>());
  }
  return fix;
}

Trace parseTrace(std::istream& in, const std::string& source_name) {
  Trace trace;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#' || view.starts_with("timestamp_ms")) continue;
    const auto f = splitFields(view, ',');
    auto where = [&] { return source_name + ":" + std::to_string(line_no) + ": "; };
    if (f.size() != 5) throw GnssParseError(where() + "expected 5 columns, got " + std::to_string(f.size()));
    KinematicState s;
    auto ts = toInt<int64_t>(f[0]);
    auto lat = toDouble(f[1]);
    auto lon = toDouble(f[2]);
    auto speed = toDouble(f[3]);
    auto heading = toDouble(f[4]);
    if (!ts || !lat || !lon || !speed || !heading) throw GnssParseError(where() + "non-numeric field");
    try {
      s.position = GeoPosition(*lat, *lon);
    } catch (const std::invalid_argument& e) {
      throw GnssParseError(where() + e.what());
    }
    if (*speed < 0.0) throw GnssParseError(where() + "negative speed");
    s.timestamp_ms = *ts;
    s.speed_mps = *speed;
    s.heading_deg = normalizeHeadingDeg(*heading);
    if (!trace.empty() && s.timestamp_ms < trace.back().timestamp_ms) {
      throw GnssParseError(where() + "timestamp " + std::to_string(s.timestamp_ms) +
                           " is earlier than the previous record");
    }
    trace.push_back(s);
  }
  return trace;
}

Trace loadTrace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GnssParseError("cannot open trace file " + path);
  return parseTrace(in, path);
}

void writeTrace(std::ostream& out, const Trace& trace) {
  out << "timestamp_ms,lat_deg,lon_deg,speed_mps,heading_deg\n";
  char buf[160];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9f,%.9f,%.3f,%.2f\n", static_cast<long long>(s.timestamp_ms),
                  s.position.latitudeDeg(), s.position.longitudeDeg(), s.speed_mps, s.heading_deg);
    out << buf;
  }
}

Trace synthesizeStraightTrace(const GeoPosition& start, double heading_deg, double speed_mps,
                              int64_t start_ms, int64_t duration_ms, int64_t period_ms) {
  if (period_ms <= 0) throw std::invalid_argument("trace period must be positive");
  Trace trace;
  for (int64_t t = 0; t <= duration_ms; t += period_ms) {
    KinematicState s;
    s.position = destinationPoint(start, heading_deg, speed_mps * static_cast<double>(t) / 1000.0);
    s.speed_mps = speed_mps;
    s.heading_deg = normalizeHeadingDeg(heading_deg);
    s.timestamp_ms = start_ms + t;
    trace.push_back(s);
  }
  return trace;
}

const KinematicState& sampleTraceHold(const Trace& trace, int64_t t_ms) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  auto it = std::upper_bound(trace.begin(), trace.end(), t_ms,
                             [](int64_t t, const KinematicState& s) { return t < s.timestamp_ms; });
  if (it == trace.begin()) return trace.front();
  return *std::prev(it);
}

GeoPosition interpolateTracePosition(const Trace& trace, int64_t t_ms) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  if (t_ms <= trace.front().timestamp_ms) return trace.front().position;
  if (t_ms >= trace.back().timestamp_ms) return trace.back().position;
  auto hi = std::upper_bound(trace.begin(), trace.end(), t_ms,
                             [](int64_t t, const KinematicState& s) { return t < s.timestamp_ms; });
  auto lo = std::prev(hi);
  const double span = static_cast<double>(hi->timestamp_ms - lo->timestamp_ms);
  const double w = span > 0 ? static_cast<double>(t_ms - lo->timestamp_ms) / span : 0.0;
  const auto& a = lo->position;
  const auto& b = hi->position;
  return GeoPosition(a.latitudeDeg() + w * (b.latitudeDeg() - a.latitudeDeg()),
                     a.longitudeDeg() + w * (b.longitudeDeg() - a.longitudeDeg()),
                     a.altitudeM() + w * (b.altitudeM() - a.altitudeM()));
}

size_t replayTrace(const Trace& trace, double speed_factor,
                   const std::function<void(const KinematicState&)>& sink, std::stop_token stop) {
  if (speed_factor < 0.0) throw std::invalid_argument("speed factor must be >= 0");
  size_t delivered = 0;
  if (trace.empty()) return 0;
  const auto start = std::chrono::steady_clock::now();
  const int64_t t0 = trace.front().timestamp_ms;
  std::mutex m;
  std::condition_variable_any cv;
  for (const auto& s : trace) {
    if (stop.stop_requested()) break;
    if (speed_factor > 0.0) {
      const auto offset = std::chrono::duration<double, std::milli>(
          static_cast<double>(s.timestamp_ms - t0) / speed_factor);
      const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset);
      std::unique_lock lock(m);
      if (cv.wait_until(lock, stop, due, [] { return false; }) || stop.stop_requested()) break;
    }
    sink(s);
    ++delivered;
  }
  return delivered;
}

GpsdClient::GpsdClient(const std::string& host_port, std::function<void(const FixUpdate&)> sink)
    : sink_(std::move(sink)) {
  net::Socket s = net::connectTcp(net::parseEndpoint(host_port));
  if (!net::sendAll(s.fd(), "?WATCH={\"enable\":true,\"json\":true};\n")) {
    throw net::NetError("gpsd closed the connection during WATCH");
  }
  fd_ = s.release();
  connected_ = true;
  thread_ = std::jthread([this] { run(); });
}

GpsdClient::~GpsdClient() { stop(); }

void GpsdClient::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(fd_, SHUT_RDWR);
  if (thread_.joinable()) thread_.join();
  net::Socket(fd_).close();
}

void GpsdClient::run() {
  net::LineReader reader(fd_);
  while (auto line = reader.next()) {
    try {
      if (auto fix = parseGpsdTpv(*line)) sink_(*fix);
    } catch (const GnssParseError&) {
      // skip garbage lines and keep listening
    }
  }
  connected_ = false;
}

}  // namespace citsbed
