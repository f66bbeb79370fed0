// Randomized checks of the cross-cutting invariants. Every generator is
// seeded so failures reproduce.

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "citsbed/channel.hpp"
#include "citsbed/codec.hpp"
#include "citsbed/facilities.hpp"
#include "citsbed/gnss.hpp"
#include "citsbed/ldm.hpp"
#include "citsbed/net.hpp"
#include "citsbed/rfanalysis.hpp"
#include "citsbed/scenario.hpp"
#include "citsbed/trial.hpp"
#include "support.hpp"

using namespace citsbed;

namespace {

// doctest would pick up the string_view toString through ADL
std::string reasonName(TriggerReason r) { return std::string(toString(r)); }

GeoPosition randomPosition(std::mt19937_64& rng, double lat_span = 89.0) {
  std::uniform_real_distribution<double> lat(-lat_span, lat_span), lon(-180.0, 180.0);
  return GeoPosition(lat(rng), lon(rng));
}

CamPayload randomCam(std::mt19937_64& rng) {
  auto u = [&](int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); };
  CamPayload p;
  p.station_id = static_cast<uint32_t>(u(0, 0xffffffff));
  p.generation_delta_time = static_cast<uint16_t>(u(0, 65535));
  p.latitude_tenth_udeg = static_cast<int32_t>(u(-900000000, 900000000));
  p.longitude_tenth_udeg = static_cast<int32_t>(u(-1800000000, 1800000000));
  p.altitude_cm = static_cast<int32_t>(u(INT32_MIN, INT32_MAX));
  p.speed_cmps = static_cast<uint16_t>(u(0, 65535));
  p.heading_tenth_deg = static_cast<uint16_t>(u(0, kMaxHeadingTenthDeg));
  p.station_type = static_cast<uint8_t>(u(0, 255));
  return p;
}

// Random-walk vehicle: speed and heading drift, occasionally stopping.
Trace randomDrive(std::mt19937_64& rng, int64_t duration_ms, int64_t period_ms) {
  std::normal_distribution<double> dv(0.0, 0.4), dh(0.0, 3.0);
  std::bernoulli_distribution stop(0.01);
  Trace t;
  KinematicState s;
  s.position = GeoPosition(45.0, 7.6);
  s.speed_mps = 8.0;
  s.heading_deg = 30.0;
  for (int64_t ms = 0; ms < duration_ms; ms += period_ms) {
    s.timestamp_ms = ms;
    t.push_back(s);
    s.speed_mps = stop(rng) ? 0.0 : std::clamp(s.speed_mps + dv(rng), 0.0, 30.0);
    s.heading_deg = normalizeHeadingDeg(s.heading_deg + dh(rng));
    s.position = destinationPoint(s.position, s.heading_deg, s.speed_mps * period_ms / 1000.0);
  }
  return t;
}

std::vector<int64_t> camTimes(const Trace& trace, const CamTriggerConfig& cfg, int64_t tick_ms = 10) {
  CamService svc(1, 5, cfg);
  std::vector<int64_t> times;
  for (int64_t t = trace.front().timestamp_ms; t <= trace.back().timestamp_ms; t += tick_ms) {
    KinematicState s = sampleTraceHold(trace, t);
    s.timestamp_ms = t;
    if (svc.poll(s)) times.push_back(t);
  }
  return times;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("free-space loss grows with distance and frequency") {
    for (double fc = 1e9; fc <= 6e9; fc += 0.25e9) {
      double prev = -1e9;
      for (double d = 1.0; d <= 1e5; d *= 1.05) {
        const double l = freeSpaceLossDb(d, fc).value;
        CHECK(l > prev);
        CHECK(freeSpaceLossDb(d, fc * 1.01).value > l);
        prev = l;
      }
    }
  }

  TEST_CASE("haversine triangle inequality") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 20000; ++i) {
      const auto a = randomPosition(rng, 90.0), b = randomPosition(rng, 90.0), c = randomPosition(rng, 90.0);
      CHECK(haversineDistance(a, c) <= haversineDistance(a, b) + haversineDistance(b, c) + 1e-6);
    }
  }

  TEST_CASE("dBm and watts roundtrip") {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> exp10(-12.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
      const double w = std::pow(10.0, exp10(rng));
      CHECK(std::abs(w - dbmToWatts(wattsToDbm(w))) / w < 1e-12);
    }
  }
}

TEST_SUITE("codec") {
  TEST_CASE("CAM and frame roundtrips are lossless and stable") {
    std::mt19937_64 rng(201);
    for (int i = 0; i < 10000; ++i) {
      const CamPayload p = randomCam(rng);
      const Bytes bytes = encodeCam(p);
      CHECK(bytes.size() == kCamEncodedSize);
      CHECK(decodeCam(bytes) == p);
      CHECK(encodeCam(CamPayload(p)) == bytes);

      Frame f;
      f.source_station_id = p.station_id;
      f.source_lat_tenth_udeg = p.latitude_tenth_udeg;
      f.source_lon_tenth_udeg = p.longitude_tenth_udeg;
      f.timestamp_ms = static_cast<uint32_t>(rng());
      f.btp_dest_port = static_cast<uint16_t>(rng());
      f.payload = bytes;
      CHECK(decodeFrame(encodeFrame(f)) == f);
    }
  }

  TEST_CASE("decoding any prefix fails cleanly") {
    std::mt19937_64 rng(202);
    for (int i = 0; i < 200; ++i) {
      const Bytes cam = encodeCam(randomCam(rng));
      Frame f;
      f.payload = cam;
      const Bytes frame = encodeFrame(f);
      for (size_t n = 0; n < cam.size(); ++n) {
        // exact-size heap copies so an over-read lands outside the allocation
        const Bytes prefix(cam.begin(), cam.begin() + static_cast<std::ptrdiff_t>(n));
        CHECK_THROWS_AS(decodeCam(prefix), CodecError);
      }
      for (size_t n = 0; n < frame.size(); ++n) {
        const Bytes prefix(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(n));
        CHECK_THROWS_AS(decodeFrame(prefix), CodecError);
      }
    }
  }

  TEST_CASE("random bytes never crash the decoders") {
    std::mt19937_64 rng(203);
    std::uniform_int_distribution<int> len(0, 80), byte(0, 255);
    for (int i = 0; i < 20000; ++i) {
      Bytes b(static_cast<size_t>(len(rng)));
      for (auto& v : b) v = static_cast<uint8_t>(byte(rng));
      try {
        const CamPayload p = decodeCam(b);
        CHECK(encodeCam(p) == b);
      } catch (const CodecError&) {
      }
      try {
        const Frame f = decodeFrame(b);
        CHECK(encodeFrame(f) == b);
      } catch (const CodecError&) {
      }
    }
  }
}

TEST_SUITE("facilities") {
  TEST_CASE("dynamic CAM gaps stay within the generation bounds") {
    std::mt19937_64 rng(301);
    const CamTriggerConfig cfg;
    for (int rep = 0; rep < 20; ++rep) {
      const auto times = camTimes(randomDrive(rng, 60000, 100), cfg);
      REQUIRE(times.size() > 1);
      for (size_t i = 1; i < times.size(); ++i) {
        const int64_t gap = times[i] - times[i - 1];
        CHECK(gap >= cfg.t_gen_min_ms);
        CHECK(gap <= cfg.t_gen_max_ms);
      }
    }
  }

  TEST_CASE("forced mode yields one CAM per period") {
    std::mt19937_64 rng(302);
    CamTriggerConfig cfg;
    cfg.forced_period_ms = 100;
    for (int rep = 0; rep < 10; ++rep) {
      const auto trace = randomDrive(rng, 10001, 1);  // covers exactly [0, 10000] ms
      const auto times = camTimes(trace, cfg);
      CHECK(std::abs(static_cast<long>(times.size()) - 100) <= 1);
      for (size_t i = 1; i < times.size(); ++i) CHECK(times[i] - times[i - 1] == 100);
    }
  }

  TEST_CASE("checkCamTrigger is pure") {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> h(0.0, 360.0), v(0.0, 40.0), d(0.0, 20.0);
    std::uniform_int_distribution<int64_t> dt(0, 2000);
    CamTriggerConfig cfg;
    for (int i = 0; i < 5000; ++i) {
      CamServiceState prev;
      prev.last_cam_state.position = GeoPosition(45.0, 7.6);
      prev.last_cam_state.heading_deg = h(rng);
      prev.last_cam_state.speed_mps = v(rng);
      prev.last_cam_time_ms = 10000;
      KinematicState now;
      now.position = destinationPoint(prev.last_cam_state.position, h(rng), d(rng));
      now.heading_deg = h(rng);
      now.speed_mps = v(rng);
      now.timestamp_ms = 10000 + dt(rng);
      cfg.forced_period_ms = i % 3 == 0 ? std::optional<int64_t>(100) : std::nullopt;
      const auto a = checkCamTrigger(prev, now, cfg);
      const auto b = checkCamTrigger(prev, now, cfg);
      CHECK(a.generate == b.generate);
      CHECK(reasonName(a.reason) == reasonName(b.reason));
    }
  }
}

TEST_SUITE("ldm") {
  TEST_CASE("interleaved upserts and sweeps keep ids unique and entries fresh") {
    std::mt19937_64 rng(401);
    std::uniform_int_distribution<uint32_t> id(1, 300);
    std::uniform_int_distribution<int> op(0, 9), jitter(-50, 0);
    std::uniform_real_distribution<double> lat(44.99, 45.01), lon(7.59, 7.61), r(0.0, 2000.0);
    LdmConfig cfg;
    cfg.max_age_ms = 2000;
    cfg.sweep_period_ms = 500;
    LdmStore store;
    std::map<uint32_t, LdmEntry> oracle;
    int64_t now = 0, next_sweep = cfg.sweep_period_ms;
    int upserts = 0;
    while (upserts < 1000) {
      now += 7;
      if (now >= next_sweep) {
        store.purgeExpired(now, cfg);
        std::erase_if(oracle, [&](const auto& kv) { return now - kv.second.last_update_ms > cfg.max_age_ms; });
        next_sweep += cfg.sweep_period_ms;
        const auto all = store.all();
        std::set<uint32_t> seen;
        for (const auto& e : all) {
          CHECK(seen.insert(e.station_id).second);
          CHECK(now - e.last_update_ms <= cfg.max_age_ms);
        }
        CHECK(all.size() == oracle.size());
      }
      if (op(rng) < 8) {
        LdmEntry e;
        e.station_id = id(rng);
        e.position = GeoPosition(lat(rng), lon(rng));
        e.last_update_ms = now + jitter(rng);
        store.upsert(e);
        oracle[e.station_id] = e;
        ++upserts;
      } else {
        const GeoPosition c(lat(rng), lon(rng));
        const double radius = r(rng);
        std::vector<uint32_t> expected;
        for (const auto& [sid, e] : oracle) {
          if (haversineDistance(c, e.position) <= radius) expected.push_back(sid);
        }
        std::vector<uint32_t> got;
        for (const auto& e : store.queryArea(c, radius)) got.push_back(e.station_id);
        CHECK(got == expected);
      }
    }
  }

  TEST_CASE("API answers pipelined requests one line each, in order") {
    std::mt19937_64 rng(402);
    LdmStore store;
    for (uint32_t i = 0; i < 40; ++i) {
      LdmEntry e;
      e.station_id = i;
      e.position = GeoPosition(45.0 + i * 1e-4, 7.6);
      store.upsert(e);
    }
    LdmApiServer server(store, 0, [] { return int64_t{1000}; });
    auto sock = net::connectTcp({"127.0.0.1", server.port()});
    net::LineReader reader(sock.fd());
    const std::vector<std::string> kinds = {
        R"({"op":"all"})", R"({"op":"id","station_id":%})", R"({"op":"area","lat":45.001,"lon":7.6,"radius_m":%})",
        "garbage", R"({"op":"what"})"};
    std::uniform_int_distribution<size_t> pick(0, kinds.size() - 1);
    std::uniform_int_distribution<int> arg(0, 500);
    std::vector<std::string> requests;
    std::string batch;
    for (int i = 0; i < 200; ++i) {
      std::string req = kinds[pick(rng)];
      if (auto pos = req.find('%'); pos != std::string::npos) req.replace(pos, 1, std::to_string(arg(rng)));
      requests.push_back(req);
      batch += req + "\n";
    }
    REQUIRE(net::sendAll(sock.fd(), batch));
    for (const auto& req : requests) {
      const auto line = reader.next();
      REQUIRE(line.has_value());
      CHECK(nlohmann::json::accept(*line));
      CHECK(*line == handleLdmRequest(req, store, 1000));
    }
    server.stop();
  }
}

TEST_SUITE("gnss") {
  TEST_CASE("checksum rejects every single-character corruption") {
    std::mt19937_64 rng(501);
    const std::string hex = "0123456789ABCDEF";
    std::uniform_int_distribution<int> printable(0x20, 0x7e);
    for (int rep = 0; rep < 50; ++rep) {
      FixUpdate fix;
      fix.position = randomPosition(rng);
      fix.speed_mps = std::uniform_real_distribution<double>(0, 50)(rng);
      fix.heading_deg = std::uniform_real_distribution<double>(0, 359)(rng);
      fix.fix_time_ms = 1714558830250 + rep * 1000;
      fix.valid = true;
      const std::string s = formatNmeaRmc(fix);
      REQUIRE(validateNmeaChecksum(s));
      const size_t star = s.find('*');
      for (size_t i = 1; i < s.size(); ++i) {
        if (i == star) continue;
        std::string bad = s;
        if (i < star) {
          char c;
          do c = static_cast<char>(printable(rng));
          while (c == s[i] || c == '*' || c == '$');
          bad[i] = c;
        } else {
          char c;
          do c = hex[static_cast<size_t>(rng() % 16)];
          while (c == std::toupper(static_cast<unsigned char>(s[i])));
          bad[i] = c;
        }
        CAPTURE(bad);
        CHECK_FALSE(validateNmeaChecksum(bad));
      }
    }
  }

  TEST_CASE("NMEA coordinate format and parse roundtrip") {
    std::mt19937_64 rng(502);
    std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
    for (int i = 0; i < 20000; ++i) {
      const double a = lat(rng), o = lon(rng);
      const auto fa = formatNmeaCoordinate(a, true), fo = formatNmeaCoordinate(o, false);
      CHECK(std::abs(parseNmeaCoordinate(fa.field, fa.hemisphere) - a) <= 1e-6);
      CHECK(std::abs(parseNmeaCoordinate(fo.field, fo.hemisphere) - o) <= 1e-6);
    }
  }

  TEST_CASE("trace replay on a virtual clock is deterministic") {
    std::mt19937_64 rng(503);
    std::ostringstream text;
    writeTrace(text, randomDrive(rng, 20000, 100));
    auto replay = [&] {
      std::istringstream in(text.str());
      const Trace t = parseTrace(in);
      std::vector<KinematicState> out;
      replayTrace(t, 0.0, [&](const KinematicState& s) { out.push_back(s); });
      return out;
    };
    const auto a = replay(), b = replay();
    REQUIRE(a.size() == 200);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].timestamp_ms == b[i].timestamp_ms);
      CHECK(a[i].position == b[i].position);
      CHECK(a[i].speed_mps == b[i].speed_mps);
      CHECK(a[i].heading_deg == b[i].heading_deg);
    }
  }
}

TEST_SUITE("channel") {
  TEST_CASE("single free-space crossover for random budgets") {
    std::mt19937_64 rng(601);
    std::uniform_real_distribution<double> sens(-100.0, -40.0), gain(-3.0, 10.0), tx(0.0, 33.0);
    for (int rep = 0; rep < 50; ++rep) {
      LinkBudgetConfig cfg;
      cfg.sensitivity_dbm = sens(rng);
      cfg.tx_antenna_gain_dbi = gain(rng);
      cfg.rx_antenna_gain_dbi = gain(rng);
      cfg.tx_power_dbm = tx(rng);
      const double d_star = freeSpaceCrossoverDistanceM(cfg);
      for (double d = 1.0; d < 2e5; d *= 1.01) {
        const bool rx = receptionDecision(receivedPowerDbm(d, cfg, FreeSpaceModel{}, 0.0), cfg) == Reception::Received;
        // skip the rounding sliver right at the crossover
        if (std::abs(d - d_star) > 1e-9 * d_star) CHECK(rx == (d <= d_star));
      }
    }
  }

  TEST_CASE("two-ray asymptote for random heights") {
    std::mt19937_64 rng(602);
    std::uniform_real_distribution<double> h(0.5, 5.0);
    const double fc = 5.9e9;
    for (int rep = 0; rep < 30; ++rep) {
      const double ht = h(rng), hr = h(rng);
      const double start = 20.0 * 4.0 * ht * hr / wavelengthM(fc);
      for (double d = start; d < 50 * start; d *= 1.1) {
        const double asym = 40 * std::log10(d) - 20 * std::log10(ht * hr);
        CHECK(std::abs(twoRayLossDb(d, ht, hr, fc, -1.0).value - asym) < 0.5);
      }
    }
  }

  TEST_CASE("scenario logs depend only on config and seed") {
    std::mt19937_64 rng(603);
    for (int rep = 0; rep < 5; ++rep) {
      ScenarioConfig cfg;
      cfg.duration_ms = 5000;
      cfg.link.shadowing_sigma_db = 4.0;
      cfg.link.rng_seed = rng();
      cfg.model = TwoRayModel{};
      for (uint32_t id = 1; id <= 4; ++id) {
        ScenarioStation st;
        st.id = id;
        if (id % 2) {
          st.static_position = destinationPoint(GeoPosition(45.0, 7.6), 90.0 * id, 50.0 * id);
          st.trigger.forced_period_ms = 100;
        } else {
          st.trace = randomDrive(rng, 5000, 100);
        }
        cfg.stations.push_back(st);
      }
      std::ostringstream a, b;
      writeEventLog(a, runScenario(cfg));
      writeEventLog(b, runScenario(cfg));
      CHECK(a.str() == b.str());
    }
  }
}

TEST_SUITE("rfanalysis") {
  TEST_CASE("Parseval for random captures") {
    std::mt19937_64 rng(701);
    std::uniform_int_distribution<size_t> segs(1, 4);
    std::uniform_real_distribution<double> scale(1e-5, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      const size_t nf = std::array<size_t, 3>{256, 1024, 65536}[rep % 3];
      const auto x = testing::randomSamples(rng, nf * (rep % 3 == 2 ? 1 : segs(rng)), scale(rng));
      const auto psd = computePsd(x, nf, 12.8e6, 5.9e9, 50.0);
      const double avg = dbmToWatts(computeAveragePowerDbm(x, 50.0));
      CHECK(integratePsdWatts(psd) == doctest::Approx(avg).epsilon(1e-9));
    }
  }

  TEST_CASE("amplitude scaling shifts every bin by 20 log10(scale)") {
    std::mt19937_64 rng(702);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto x = testing::randomSamples(rng, 2048);
      const double a = scale(rng);
      auto y = x;
      for (auto& v : y) v *= a;
      const auto px = computePsd(x, 512, 1e6, 0.0), py = computePsd(y, 512, 1e6, 0.0);
      for (size_t j = 0; j < 512; ++j) {
        CHECK(py.psd_dbm_per_hz[j] - px.psd_dbm_per_hz[j] == doctest::Approx(20 * std::log10(a)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("burst segments are sorted, disjoint and in bounds") {
    std::mt19937_64 rng(703);
    std::uniform_int_distribution<size_t> len(1, 3000), window(1, 200);
    std::uniform_real_distribution<double> level(1e-6, 1.0), guard(0.0, 30.0);
    std::bernoulli_distribution burst(0.3);
    for (int rep = 0; rep < 200; ++rep) {
      IqCapture cap;
      cap.fs_hz = 1e6;
      for (int part = 0; part < 6; ++part) {
        const auto chunk = testing::randomSamples(rng, len(rng), burst(rng) ? level(rng) : 1e-4);
        cap.samples.insert(cap.samples.end(), chunk.begin(), chunk.end());
      }
      const auto segs = detectBursts(cap, guard(rng), window(rng));
      for (size_t i = 0; i < segs.size(); ++i) {
        CHECK(segs[i].begin < segs[i].end);
        CHECK(segs[i].end <= cap.samples.size());
        if (i) CHECK(segs[i - 1].end < segs[i].begin);
      }
    }
  }

  TEST_CASE("lowering PSD bins never creates violations") {
    std::mt19937_64 rng(704);
    std::uniform_real_distribution<double> drop(0.0, 20.0);
    std::bernoulli_distribution lower(0.3);
    for (int rep = 0; rep < 30; ++rep) {
      const auto x = testing::randomSamples(rng, 1024, 1e-3);
      auto psd = computePsd(x, 1024, 12.8e6, 5.9e9);
      const double mid = psd.psd_dbm_per_hz[512];
      const EmissionMask mask({{0, mid + 2}, {3e6, mid}, {6e6, mid - 3}});
      const auto before = checkMask(psd, mask);
      for (auto& p : psd.psd_dbm_per_hz) {
        if (lower(rng)) p -= drop(rng);
      }
      const auto after = checkMask(psd, mask);
      std::set<double> allowed;
      for (const auto& v : before.violations) allowed.insert(v.freq_hz);
      for (const auto& v : after.violations) CHECK(allowed.count(v.freq_hz) == 1);
      CHECK(after.violations.size() <= before.violations.size());
    }
  }
}

TEST_SUITE("trial") {
  TEST_CASE("windows account for every record exactly once") {
    std::mt19937_64 rng(801);
    std::uniform_int_distribution<int> step(0, 400);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<RxLogRecord> recs;
      int64_t t = step(rng) * 37;
      const size_t n = 1 + rng() % 300;
      for (size_t i = 0; i < n; ++i) {
        RxLogRecord r;
        r.rx_time_ms = t;
        r.rx_position = destinationPoint(GeoPosition(45.0, 7.6), 90.0, t / 100.0);
        recs.push_back(r);
        t += step(rng);
      }
      const Trace trace = synthesizeStraightTrace(GeoPosition(45.0, 7.6), 90.0, 10.0, 0, t + 5000, 100);
      PdrOptions opt;
      opt.receiver_trace = rep % 2 ? &trace : nullptr;
      int total = 0;
      for (const auto& w : windowPdr(recs, opt)) {
        CHECK(w.received_count >= 0);
        total += w.received_count;
      }
      CHECK(total == static_cast<int>(n));
    }
  }

  TEST_CASE("cluster means lie inside the members' bounding box") {
    std::mt19937_64 rng(802);
    std::uniform_real_distribution<double> lat(44.0, 46.0), lon(7.0, 8.0);
    std::vector<RxLogRecord> recs;
    for (int i = 0; i < 2000; ++i) {
      RxLogRecord r;
      r.sender_id = static_cast<uint32_t>(rng() % 5);
      r.tx_position = GeoPosition(lat(rng), lon(rng));
      recs.push_back(r);
    }
    const size_t g = 7;
    const auto clusters = clusterBySender(recs, g);
    std::map<uint32_t, std::vector<GeoPosition>> members;
    for (const auto& r : recs) members[r.sender_id].push_back(r.tx_position);
    std::map<uint32_t, size_t> block;
    for (const auto& c : clusters) {
      const auto& m = members[c.sender_id];
      const size_t start = block[c.sender_id]++ * g;
      double lo_lat = 90, hi_lat = -90, lo_lon = 180, hi_lon = -180;
      for (size_t i = start; i < start + g; ++i) {
        lo_lat = std::min(lo_lat, m[i].latitudeDeg());
        hi_lat = std::max(hi_lat, m[i].latitudeDeg());
        lo_lon = std::min(lo_lon, m[i].longitudeDeg());
        hi_lon = std::max(hi_lon, m[i].longitudeDeg());
      }
      CHECK(c.mean_position.latitudeDeg() >= lo_lat - 1e-12);
      CHECK(c.mean_position.latitudeDeg() <= hi_lat + 1e-12);
      CHECK(c.mean_position.longitudeDeg() >= lo_lon - 1e-12);
      CHECK(c.mean_position.longitudeDeg() <= hi_lon + 1e-12);
    }
  }

  TEST_CASE("removing records never increases the range") {
    std::mt19937_64 rng(803);
    for (int rep = 0; rep < 30; ++rep) {
      // receiver drives away; each record sits where the receiver was
      const Trace trace = synthesizeStraightTrace(GeoPosition(45.0, 7.6), 90.0, 10.0, 0, 60000, 100);
      std::vector<RxLogRecord> recs;
      for (const auto& s : trace) {
        if (rng() % 4 == 0) continue;
        RxLogRecord r;
        r.rx_time_ms = s.timestamp_ms;
        r.rx_position = s.position;
        recs.push_back(r);
      }
      PdrOptions opt;
      opt.tx_position = GeoPosition(45.0, 7.6);
      opt.receiver_trace = &trace;
      const auto full = windowPdr(recs, opt);
      const double range = estimateRange(full).max_rx_distance_m;

      // Window-level: fewer receptions in fixed windows.
      auto thinned = full;
      for (auto& w : thinned) {
        if (w.received_count > 0 && rng() % 3 == 0) w.received_count = static_cast<int>(rng() % w.received_count);
      }
      try {
        CHECK(estimateRange(thinned).max_rx_distance_m <= range);
      } catch (const std::invalid_argument&) {
      }

      // Log-level: drop every record of randomly chosen seconds.
      std::vector<RxLogRecord> kept;
      for (const auto& r : recs) {
        if ((r.rx_time_ms / 1000) % 5 != static_cast<int64_t>(rep % 5)) kept.push_back(r);
      }
      CHECK(estimateRange(windowPdr(kept, opt)).max_rx_distance_m <= range + 1e-9);
    }
  }
}

TEST_SUITE("cli") {
  TEST_CASE("commands are reproducible and their outputs reload") {
    const std::string cli = CITSBED_CLI;
    testing::TempDir dir;
    auto run = [&](const std::string& args) {
      const auto r = testing::runCommand(cli + " " + args + " 2> /dev/null");
      REQUIRE(r.exit_code == 0);
      return r.output;
    };
    const std::string synth = "trace synth --lat 45 --lon 7.6 --heading 45 --speed 12 --duration-s 30";
    CHECK(run(synth) == run(synth));
    std::istringstream trace_text(run(synth));
    CHECK(parseTrace(trace_text).size() == 301);  // both ends included

    const std::string scenario = "scenario run --config " + std::string(CITSBED_DATA_DIR) + "/scenarios/two_ray_urban.yaml";
    const std::string log = run(scenario);
    CHECK(log == run(scenario));
    testing::writeText(dir.file("log.csv"), log);
    std::istringstream log_text(log);
    const auto records = parseRxLog(log_text);
    const std::string trial = "analyze trial --log " + dir.file("log.csv");
    const std::string summary = run(trial);
    CHECK(summary == run(trial));
    CHECK(nlohmann::json::parse(summary)["records"] == records.size());

    std::mt19937_64 rng(901);
    saveIqCapture(dir.file("c.iqc"), IqCapture{12.8e6, 5.9e9, testing::randomSamples(rng, 8192, 1e-3)});
    const std::string spectrum = "analyze spectrum --capture " + dir.file("c.iqc") + " --nfft 1024 --csv " + dir.file("p.csv");
    const std::string report = run(spectrum);
    const std::string psd = testing::readText(dir.file("p.csv"));
    CHECK(report == run(spectrum));
    CHECK(psd == testing::readText(dir.file("p.csv")));
    CHECK(nlohmann::json::parse(report)["n_fft"] == 1024);
  }
}
