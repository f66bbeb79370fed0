// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../support.hpp"
#include "citsbed/channel.hpp"
#include "citsbed/codec.hpp"
#include "citsbed/facilities.hpp"
#include "citsbed/fft.hpp"
#include "citsbed/gnss.hpp"
#include "citsbed/ldm.hpp"
#include "citsbed/net.hpp"
#include "citsbed/rfanalysis.hpp"
#include "citsbed/scenario.hpp"
#include "citsbed/trial.hpp"

using namespace citsbed;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

Outcome dftOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  const size_t sizes[] = {16, 256, 1024};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const size_t n = sizes[i % 3];
    const FftPlan plan(n);
    const auto x = testing::randomSamples(rng, n);
    const auto got = plan.forward(x);
    const auto want = testing::bruteForceDft(x);
    double peak = 0.0, err = 0.0;
    for (size_t k = 0; k < n; ++k) {
      peak = std::max(peak, std::abs(want[k]));
      err = std::max(err, std::abs(got[k] - want[k]));
    }
    worst = std::max(worst, err / peak);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-9 && secs < 10.0, fmt("max relative error %.3g, %.2f s", worst, secs)};
}

Outcome parseval() {
  std::mt19937_64 rng(2);
  const size_t sizes[] = {256, 1024, 65536};
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const size_t nf = sizes[i % 3];
    const auto x = testing::randomSamples(rng, nf * (1 + i % 2), 1e-3 * (1 + i));
    const double psd_w = integratePsdWatts(computePsd(x, nf, 12.8e6, 5.9e9, 50.0));
    const double avg_w = dbmToWatts(computeAveragePowerDbm(x, 50.0));
    worst = std::max(worst, std::abs(psd_w - avg_w) / avg_w);
  }
  return {worst < 1e-9, fmt("worst relative gap %.3g over 20 captures", worst)};
}

Outcome tonePsd() {
  const size_t n = 65536, m = 4321;
  std::vector<Complex> x(n);
  for (size_t i = 0; i < n; ++i) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>((m * i) % n) / static_cast<double>(n);
    x[i] = {std::cos(ang), std::sin(ang)};
  }
  const auto psd = computePsd(x, n, 12.8e6, 5.9e9, 50.0);
  const double v = psd.psd_dbm_per_hz[n / 2 + m];
  return {std::abs(v - (-9.897)) <= 1e-3, fmt("bin PSD %.6f dBm/Hz", v)};
}

Outcome maskCheck() {
  const EmissionMask mask = loadEmissionMask(std::string(CITSBED_DATA_DIR) + "/masks/illustrative_10mhz.txt");
  const size_t n = 65536;
  const double fs = 12.8e6, fc = 5.9e9, b = fs / n;
  const double lo = 3.0e6, hi = lo + 100e3;
  std::mt19937_64 rng(4);
  auto shaped = [&](double raise_db) {
    const auto x = testing::synthesizeSpectrum(
        n, fs, 50.0,
        [&](double off) { return mask.limitAt(off) - 3.0 + (off >= lo && off < hi ? raise_db : 0.0); }, rng);
    return checkMask(computePsd(x, n, fs, fc, 50.0), mask);
  };
  const MaskReport clean = shaped(0.0);
  const MaskReport hot = shaped(6.0);
  size_t stray = 0;
  for (const auto& v : hot.violations) {
    const double off = v.freq_hz - fc;
    if (off < lo - 2 * b || off >= hi + 2 * b) ++stray;
  }
  const bool pass = clean.compliant && !hot.compliant && stray == 0 && !hot.violations.empty();
  return {pass, fmt("clean margin %.3f dB; raised region: %.0f violations, %.0f outside +-2 bins",
                    clean.worst_margin_db, static_cast<double>(hot.violations.size()), static_cast<double>(stray))};
}

Outcome linearity() {
  // tones through a fixed 10 dB attenuator, measured from synthetic captures
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<PowerPoint> pts;
  for (double in : {-20.0, -10.0, 0.0, 10.0, 20.0}) {
    const double amp = std::sqrt(dbmToWatts(PowerDbm{in - 10.0}) * 50.0);
    std::vector<Complex> x(8192);
    for (auto& v : x) v = std::polar(amp, phase(rng));
    pts.push_back({in, computeAveragePowerDbm(x, 50.0).value});
  }
  const LinearityFit fit = fitPowerLinearity(pts);
  const bool pass = std::abs(fit.slope - 1.0) <= 1e-3 && std::abs(fit.offset_db - 10.0) <= 0.01;
  return {pass, fmt("slope %.6f, offset %.4f dB", fit.slope, fit.offset_db)};
}

Outcome freeSpace() {
  const double l1 = freeSpaceLossDb(1.0, 5.9e9).value;
  double worst = 0.0;
  for (double d = 1.0; d < 1e5; d *= 3.7) {
    worst = std::max(worst, std::abs(freeSpaceLossDb(2 * d, 5.9e9).value - freeSpaceLossDb(d, 5.9e9).value - 6.0206));
  }
  return {std::abs(l1 - 47.86) <= 0.01 && worst <= 1e-3, fmt("L0(1 m) %.4f dB, doubling error %.2g dB", l1, worst)};
}

Outcome twoRayDip() {
  double found = -1.0, excess_at = 0.0;
  for (double d = 50.0; d <= 400.0; d += 0.01) {
    const double excess = twoRayLossDb(d, 1.5, 1.5, 5.9e9, -1.0).value - freeSpaceLossDb(d, 5.9e9).value;
    if (excess >= 6.0) {
      found = d;
      excess_at = excess;
      break;
    }
  }
  if (found < 0) return {false, "no distance in [50, 400] m with 6 dB excess"};
  return {true, fmt("first >= 6 dB excess at %.2f m (%.1f dB)", found, excess_at)};
}

Outcome rangeReproduction() {
  ScenarioConfig cfg = loadScenarioConfig(std::string(CITSBED_DATA_DIR) + "/scenarios/driveaway.yaml");
  LinkBudgetConfig ref;
  ref.tx_power_dbm = 26.0;
  ref.tx_antenna_gain_dbi = 3.9;
  ref.rx_antenna_gain_dbi = 3.9;
  ref.cable_loss_db = cfg.link.cable_loss_db;
  const double sens = calibrateSensitivityDbm(ref, 560.0);
  cfg.link.sensitivity_dbm = sens;
  cfg.link.shadowing_sigma_db = 0.0;
  const double crossover = freeSpaceCrossoverDistanceM(cfg.link);

  const auto events = runScenario(cfg);
  std::ostringstream log;
  writeEventLog(log, events);
  std::istringstream in(log.str());
  const auto records = parseRxLog(in, "driveaway", 7);

  const ScenarioStation* rx = nullptr;
  for (const auto& s : cfg.stations) {
    if (s.id == 7) rx = &s;
  }
  if (!rx || !rx->trace) return {false, "driveaway scenario lacks receiver 7 with a trace"};
  PdrOptions opt;
  opt.tx_position = GeoPosition(45.0, 7.6);
  opt.receiver_trace = &*rx->trace;
  const auto windows = windowPdr(records, opt);
  const double range = estimateRange(windows).max_rx_distance_m;
  size_t beyond = 0, beyond_nonzero = 0;
  for (const auto& w : windows) {
    if (w.distance_m && *w.distance_m > crossover) {
      ++beyond;
      beyond_nonzero += w.received_count != 0;
    }
  }
  const bool pass = std::abs(range - 560.0) <= 10.0 && beyond > 0 && beyond_nonzero == 0;
  return {pass, fmt("sensitivity %.3f dBm, max range %.1f m", sens, range) +
                    fmt(", %.0f windows beyond crossover, %.0f nonzero", static_cast<double>(beyond),
                        static_cast<double>(beyond_nonzero))};
}

Outcome camCadence() {
  // 60 s drive with speed and heading changes, polled every 10 ms of simulated time
  Trace trace;
  KinematicState s;
  s.position = GeoPosition(45.0, 7.6);
  for (int64_t t = 0; t < 60000; t += 100) {
    s.timestamp_ms = t;
    s.speed_mps = t < 20000 ? 14.0 : (t < 40000 ? 3.0 : 0.0);
    s.heading_deg = t < 20000 ? 0.0 : std::fmod((t - 20000) * 0.02, 360.0);
    trace.push_back(s);
    s.position = destinationPoint(s.position, s.heading_deg, s.speed_mps * 0.1);
  }
  auto cams = [&](const CamTriggerConfig& cfg) {
    CamService svc(1, 5, cfg);
    std::vector<int64_t> times;
    for (int64_t t = 0; t < 60000; t += 10) {
      KinematicState k = sampleTraceHold(trace, t);
      k.timestamp_ms = t;
      if (svc.poll(k)) times.push_back(t);
    }
    return times;
  };
  const auto dynamic = cams(CamTriggerConfig{});
  int64_t lo = INT64_MAX, hi = 0;
  for (size_t i = 1; i < dynamic.size(); ++i) {
    lo = std::min(lo, dynamic[i] - dynamic[i - 1]);
    hi = std::max(hi, dynamic[i] - dynamic[i - 1]);
  }
  CamTriggerConfig forced;
  forced.forced_period_ms = 100;
  const size_t n_forced = cams(forced).size();
  const bool pass = dynamic.size() > 1 && lo >= 100 && hi <= 1000 && n_forced >= 599 && n_forced <= 601;
  return {pass, fmt("dynamic gaps [%.0f, %.0f] ms, forced %.0f CAMs in 60 s", static_cast<double>(lo),
                    static_cast<double>(hi), static_cast<double>(n_forced))};
}

Outcome codec() {
  std::mt19937_64 rng(10);
  auto u = [&](int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); };
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    CamPayload p;
    p.station_id = static_cast<uint32_t>(u(0, 0xffffffff));
    p.generation_delta_time = static_cast<uint16_t>(u(0, 65535));
    p.latitude_tenth_udeg = static_cast<int32_t>(u(-900000000, 900000000));
    p.longitude_tenth_udeg = static_cast<int32_t>(u(-1800000000, 1800000000));
    p.altitude_cm = static_cast<int32_t>(u(INT32_MIN, INT32_MAX));
    p.speed_cmps = static_cast<uint16_t>(u(0, 65535));
    p.heading_tenth_deg = static_cast<uint16_t>(u(0, kMaxHeadingTenthDeg));
    p.station_type = static_cast<uint8_t>(u(0, 255));
    if (decodeCam(encodeCam(p)) != p) ++bad;
  }
  const std::string hex = "02020000002a03e81a9d0ca0067f354000000000056d034c0500";
  Bytes golden;
  for (size_t i = 0; i < hex.size(); i += 2) golden.push_back(static_cast<uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  CamPayload pinned;
  pinned.station_id = 42;
  pinned.generation_delta_time = 1000;
  pinned.latitude_tenth_udeg = 446500000;
  pinned.longitude_tenth_udeg = 109000000;
  pinned.speed_cmps = 1389;
  pinned.heading_tenth_deg = 844;
  pinned.station_type = 5;
  const bool golden_ok = decodeCam(golden) == pinned && encodeCam(pinned) == golden;
  return {bad == 0 && golden_ok,
          fmt("%.0f lossy roundtrips of 10000, golden vector ", bad) + (golden_ok ? "ok" : "MISMATCH")};
}

Outcome ldm() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<uint32_t> id(1, 250);
  std::uniform_real_distribution<double> lat(44.99, 45.01), lon(7.59, 7.61), r(0.0, 2000.0);
  LdmConfig cfg;
  cfg.max_age_ms = 1500;
  cfg.sweep_period_ms = 300;
  LdmStore store;
  std::map<uint32_t, LdmEntry> oracle;
  int64_t now = 0;
  size_t mismatches = 0, stale = 0, queries = 0;
  for (int i = 0; i < 1000; ++i) {
    now += 11;
    LdmEntry e;
    e.station_id = id(rng);
    e.position = GeoPosition(lat(rng), lon(rng));
    e.last_update_ms = now;
    store.upsert(e);
    oracle[e.station_id] = e;
    if (now % cfg.sweep_period_ms < 11) {
      store.purgeExpired(now, cfg);
      std::erase_if(oracle, [&](const auto& kv) { return now - kv.second.last_update_ms > cfg.max_age_ms; });
      for (const auto& x : store.all()) stale += now - x.last_update_ms > cfg.max_age_ms;
    }
    if (i % 5 == 0) {
      const GeoPosition c(lat(rng), lon(rng));
      const double radius = r(rng);
      std::vector<uint32_t> expected, got;
      for (const auto& [sid, x] : oracle) {
        if (haversineDistance(c, x.position) <= radius) expected.push_back(sid);
      }
      for (const auto& x : store.queryArea(c, radius)) got.push_back(x.station_id);
      mismatches += got != expected;
      ++queries;
    }
  }

  LdmApiServer server(store, 0, [&] { return now; });
  auto sock = net::connectTcp({"127.0.0.1", server.port()});
  net::LineReader reader(sock.fd());
  size_t api_mismatch = 0;
  const std::vector<std::string> requests = {
      R"({"op":"all"})", R"({"op":"area","lat":45.0,"lon":7.6,"radius_m":800})",
      R"({"op":"id","station_id":17})", R"({"op":"area","lat":45.005,"lon":7.605,"radius_m":300})"};
  for (const auto& req : requests) {
    if (!net::sendAll(sock.fd(), req + "\n")) return {false, "could not write to the LDM API"};
    const auto line = reader.next();
    api_mismatch += !line || *line != handleLdmRequest(req, store, now);
  }
  server.stop();
  const bool pass = mismatches == 0 && stale == 0 && api_mismatch == 0;
  return {pass, fmt("%.0f/%.0f area queries differ from the oracle, %.0f stale entries", static_cast<double>(mismatches),
                    static_cast<double>(queries), static_cast<double>(stale)) +
                    fmt(", %.0f API mismatches", static_cast<double>(api_mismatch))};
}

Outcome endToEnd() {
  const std::string cli = CITSBED_CLI;
  const std::string cfg = std::string(CITSBED_DATA_DIR) + "/scenarios/two_ray_urban.yaml";
  testing::TempDir dir;
  const auto a = testing::runCommand(cli + " scenario run --config " + cfg + " --out " + dir.file("a.csv") + " 2> /dev/null");
  const auto b = testing::runCommand(cli + " scenario run --config " + cfg + " --out " + dir.file("b.csv") + " 2> /dev/null");
  if (a.exit_code != 0 || b.exit_code != 0) return {false, "scenario run failed"};
  const std::string log = testing::readText(dir.file("a.csv"));
  const bool identical = log == testing::readText(dir.file("b.csv"));
  size_t rx_rows = 0;
  std::istringstream lines(log);
  for (std::string line; std::getline(lines, line);) rx_rows += line.find(",RX,") != std::string::npos;
  const auto trial = testing::runCommand(cli + " analyze trial --log " + dir.file("a.csv") + " 2> /dev/null");
  if (trial.exit_code != 0) return {false, "analyze trial failed"};
  const auto summary = json::parse(trial.output);
  int64_t sum = 0;
  for (const auto& s : summary["senders"]) sum += s["received_total"].get<int64_t>();
  const bool pass = identical && rx_rows > 0 && sum == static_cast<int64_t>(rx_rows) &&
                    summary["total_received"].get<int64_t>() == sum;
  return {pass, std::string(identical ? "logs identical" : "logs DIFFER") +
                    fmt(", %.0f RX rows, %.0f received in windows", static_cast<double>(rx_rows), static_cast<double>(sum))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"DFT oracle", dftOracle},
      {"Parseval consistency", parseval},
      {"tone PSD", tonePsd},
      {"mask check", maskCheck},
      {"power linearity", linearity},
      {"free-space loss", freeSpace},
      {"two-ray dip", twoRayDip},
      {"range reproduction", rangeReproduction},
      {"CAM cadence", camCadence},
      {"codec", codec},
      {"LDM", ldm},
      {"end-to-end determinism", endToEnd},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
