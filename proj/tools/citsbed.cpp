// citsbed: station runtime, scenario runner and analysis pipelines.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "citsbed/channel.hpp"
#include "citsbed/gnss.hpp"
#include "citsbed/ldm.hpp"
#include "citsbed/net.hpp"
#include "citsbed/rfanalysis.hpp"
#include "citsbed/scenario.hpp"
#include "citsbed/station.hpp"
#include "citsbed/transport.hpp"
#include "citsbed/trial.hpp"

using namespace citsbed;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonCompliant = 2;

std::atomic<bool> g_interrupted{false};

extern "C" void onSignal(int) { g_interrupted = true; }

// JSON has no infinity; unbounded margins become null.
json finiteOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void writeJson(const std::string& path, const json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::ofstream openOut(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// ---- station --------------------------------------------------------------

struct StationArgs {
  std::string config;
  std::string gnss;
  std::optional<int> ldm_port;
  std::optional<int64_t> forced_period_ms;
  std::string transport = "sim";
  double duration_s = 0.0;
  double replay_speed = 1.0;
};

int runStation(const StationArgs& args) {
  StationFile file = loadStationConfig(args.config);
  if (args.ldm_port) file.station.ldm.api_listen_port = static_cast<uint16_t>(*args.ldm_port);
  if (args.forced_period_ms) file.station.trigger.forced_period_ms = *args.forced_period_ms;
  file.station.validate();

  const TransportSpec spec = parseTransportSpec(args.transport);
  std::shared_ptr<Transport> transport;
  std::shared_ptr<SimBus> bus;
  if (spec.kind == TransportSpec::Kind::Udp) {
    transport = std::make_shared<UdpTransport>(spec.endpoint, spec.iface);
  } else {
    bus = std::make_shared<SimBus>(file.link, file.model);
    transport = bus->attach(file.station.tx_power_dbm);
  }

  std::mutex out_mutex;
  std::cout << kEventLogHeader << std::endl;
  auto sink = [&](const ScenarioEvent& e) {
    std::lock_guard lock(out_mutex);
    std::cout << formatEventRow(e) << std::endl;
  };

  StationRuntime runtime(file.station, transport, systemClockMs, sink);
  runtime.start();
  if (auto port = runtime.ldmApiPort()) std::cerr << "ldm api listening on port " << *port << '\n';

  std::jthread replay;
  std::unique_ptr<GpsdClient> gpsd;
  if (args.gnss.starts_with("trace:")) {
    Trace trace = loadTrace(args.gnss.substr(6));
    if (trace.empty()) throw std::runtime_error("trace is empty");
    replay = std::jthread([&runtime, trace = std::move(trace), speed = args.replay_speed](std::stop_token st) {
      replayTrace(trace, speed, [&](const KinematicState& s) { runtime.submitState(s); }, st);
    });
  } else if (args.gnss.starts_with("gpsd:")) {
    gpsd = std::make_unique<GpsdClient>(args.gnss.substr(5), [&](const FixUpdate& f) { runtime.submitFix(f); });
  } else if (!args.gnss.empty()) {
    throw std::runtime_error("--gnss must be trace:<file> or gpsd:<host:port>");
  }

  std::signal(SIGINT, onSignal);
  std::signal(SIGTERM, onSignal);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(args.duration_s);
  while (!g_interrupted) {
    if (args.duration_s > 0 && std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  if (replay.joinable()) {
    replay.request_stop();
    replay.join();
  }
  if (gpsd) gpsd->stop();
  runtime.stop();
  std::cerr << "tx " << runtime.txCount() << " rx " << runtime.rxCount() << '\n';
  return kExitOk;
}

// ---- analyze spectrum -----------------------------------------------------

struct SpectrumArgs {
  std::string capture;
  std::string mask;
  size_t nfft = kDefaultFftSize;
  double impedance = kDefaultImpedanceOhm;
  double guard_db = kDefaultGuardDb;
  size_t window = 64;
  bool no_burst_filter = false;
  std::string out;
  std::string csv;
};

// Burst samples when any bursts are found, otherwise the whole capture.
std::vector<Complex> selectSamples(const IqCapture& cap, bool filter, double guard_db, size_t window,
                                   json& info) {
  if (!filter) {
    info["burst_filter"] = false;
    return cap.samples;
  }
  const auto bursts = detectBursts(cap, guard_db, window);
  info["burst_filter"] = true;
  info["bursts"] = bursts.size();
  if (bursts.empty()) return cap.samples;
  return extractSegments(cap.samples, bursts);
}

int analyzeSpectrum(const SpectrumArgs& args) {
  const IqCapture cap = loadIqCapture(args.capture);
  json report;
  report["capture"] = args.capture;
  const auto samples = selectSamples(cap, !args.no_burst_filter, args.guard_db, args.window, report);
  if (samples.size() < args.nfft) {
    throw std::runtime_error("only " + std::to_string(samples.size()) + " samples available for nfft " +
                             std::to_string(args.nfft));
  }
  const PsdEstimate psd = computePsd(samples, args.nfft, cap.fs_hz, cap.fc_hz, args.impedance);
  report["samples_used"] = samples.size();
  report["n_fft"] = psd.n_fft;
  report["n_segments"] = psd.n_segments;
  report["bin_width_hz"] = psd.bin_width_hz;
  report["average_power_dbm"] = computeAveragePowerDbm(samples, args.impedance).value;

  int code = kExitOk;
  if (!args.mask.empty()) {
    const MaskReport mr = checkMask(psd, loadEmissionMask(args.mask));
    report["compliant"] = mr.compliant;
    report["bins_checked"] = mr.bins_checked;
    report["bins_skipped"] = mr.bins_skipped;
    report["worst_margin_db"] = finiteOrNull(mr.worst_margin_db);
    json v = json::array();
    for (const auto& x : mr.violations) {
      v.push_back({{"freq_hz", x.freq_hz}, {"psd_dbm_per_hz", x.psd_dbm_per_hz}, {"limit_dbm_per_hz", x.limit_dbm_per_hz}});
    }
    report["violations"] = std::move(v);
    if (!mr.compliant) code = kExitNonCompliant;
  }

  if (!args.csv.empty()) {
    auto out = openOut(args.csv);
    out << "freq_hz,psd_dbm_per_hz\n";
    out.precision(12);
    for (size_t j = 0; j < psd.freqs_hz.size(); ++j) out << psd.freqs_hz[j] << ',' << psd.psd_dbm_per_hz[j] << '\n';
  }
  writeJson(args.out, report);
  return code;
}

// ---- analyze power --------------------------------------------------------

struct PowerArgs {
  std::string sweep;
  std::string capture;
  double impedance = kDefaultImpedanceOhm;
  double guard_db = kDefaultGuardDb;
  size_t window = 64;
  bool no_burst_filter = false;
  std::string out;
};

double capturePowerDbm(const std::string& path, const PowerArgs& args) {
  const IqCapture cap = loadIqCapture(path);
  json ignored;
  const auto samples = selectSamples(cap, !args.no_burst_filter, args.guard_db, args.window, ignored);
  return computeAveragePowerDbm(samples, args.impedance).value;
}

// Rows `input_dbm,output` where output is a dBm value or a capture path
// (relative to the sweep file).
std::vector<PowerPoint> loadSweep(const std::string& path, const PowerArgs& args) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "cannot open file");
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<PowerPoint> points;
  std::string line;
  size_t offset = 0;
  while (std::getline(in, line)) {
    const size_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.starts_with("input_dbm")) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path, at, "expected input_dbm,output");
    PowerPoint p;
    const std::string in_s = line.substr(0, comma);
    const std::string out_s = line.substr(comma + 1);
    size_t used = 0;
    try {
      p.input_dbm = std::stod(in_s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != in_s.size()) throw FormatError(path, at, "invalid input_dbm '" + in_s + "'");
    try {
      p.output_dbm = std::stod(out_s, &used);
      if (used != out_s.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      auto cap = std::filesystem::path(out_s);
      if (cap.is_relative()) cap = base / cap;
      p.output_dbm = capturePowerDbm(cap.string(), args);
    }
    points.push_back(p);
  }
  return points;
}

int analyzePower(const PowerArgs& args) {
  json report;
  if (!args.capture.empty()) {
    report["average_power_dbm"] = capturePowerDbm(args.capture, args);
  }
  if (!args.sweep.empty()) {
    const auto points = loadSweep(args.sweep, args);
    const LinearityFit fit = fitPowerLinearity(points);
    json pts = json::array();
    for (const auto& p : points) pts.push_back({{"input_dbm", p.input_dbm}, {"output_dbm", p.output_dbm}});
    report["points"] = std::move(pts);
    report["slope"] = fit.slope;
    report["intercept_db"] = fit.intercept_db;
    report["residuals_db"] = fit.residuals_db;
    report["offset_db"] = fit.offset_db;
    report["offset_residuals_db"] = fit.offset_residuals_db;
  }
  if (report.is_null()) throw std::runtime_error("analyze power needs --sweep or --capture");
  writeJson(args.out, report);
  return kExitOk;
}

// ---- analyze trial --------------------------------------------------------

struct TrialArgs {
  std::string log;
  std::optional<uint32_t> sender;
  std::optional<uint32_t> receiver;
  std::optional<double> tx_lat;
  std::optional<double> tx_lon;
  int64_t tx_period_ms = 100;
  int64_t window_ms = 1000;
  std::string rx_trace;
  std::string out;
  std::string clusters;
  std::string csv;
  size_t group = 10;
};

int analyzeTrial(const TrialArgs& args) {
  if (args.tx_lat.has_value() != args.tx_lon.has_value()) {
    throw std::runtime_error("--tx-lat and --tx-lon go together");
  }
  const auto records = loadRxLog(args.log, args.receiver);
  std::optional<Trace> trace;
  if (!args.rx_trace.empty()) trace = loadTrace(args.rx_trace);

  std::map<uint32_t, std::vector<RxLogRecord>> by_sender;
  for (const auto& r : records) {
    if (!args.sender || r.sender_id == *args.sender) by_sender[r.sender_id].push_back(r);
  }

  json summary;
  summary["log"] = args.log;
  summary["records"] = records.size();
  json senders = json::array();
  json window_features = json::array();
  std::vector<PdrWindow> all_windows;
  int64_t total_received = 0;

  for (const auto& [id, recs] : by_sender) {
    PdrOptions opt;
    opt.tx_period_ms = args.tx_period_ms;
    opt.window_ms = args.window_ms;
    if (args.tx_lat) {
      opt.tx_position = GeoPosition(*args.tx_lat, *args.tx_lon);
    } else {
      // stationary transmitter: average of the positions it reported
      double lat = 0, lon = 0;
      for (const auto& r : recs) {
        lat += r.tx_position.latitudeDeg();
        lon += r.tx_position.longitudeDeg();
      }
      opt.tx_position = GeoPosition(lat / recs.size(), lon / recs.size());
    }
    if (trace) opt.receiver_trace = &*trace;
    const auto windows = windowPdr(recs, opt);

    json s;
    s["sender_id"] = id;
    s["records"] = recs.size();
    s["tx_lat"] = opt.tx_position.latitudeDeg();
    s["tx_lon"] = opt.tx_position.longitudeDeg();
    s["windows"] = windows.size();
    int64_t received = 0;
    for (const auto& w : windows) received += w.received_count;
    s["received_total"] = received;
    total_received += received;
    try {
      const RangeEstimate range = estimateRange(windows);
      s["max_rx_distance_m"] = range.max_rx_distance_m;
      json curve = json::array();
      for (const auto& b : range.distance_pdr_curve) {
        curve.push_back({{"distance_m", b.distance_start_m}, {"mean_pdr", b.mean_pdr}, {"windows", b.windows}});
      }
      s["distance_pdr_curve"] = std::move(curve);
    } catch (const std::invalid_argument&) {
      s["max_rx_distance_m"] = nullptr;
    }
    senders.push_back(std::move(s));

    json fc = emitGeoJson(std::span<const PdrWindow>(windows));
    for (auto& f : fc["features"]) {
      f["properties"]["sender_id"] = id;
      window_features.push_back(std::move(f));
    }
    all_windows.insert(all_windows.end(), windows.begin(), windows.end());
  }
  summary["senders"] = std::move(senders);
  summary["total_received"] = total_received;

  if (!args.out.empty()) {
    writeJson(args.out, json{{"type", "FeatureCollection"}, {"features", std::move(window_features)}});
  }
  if (!args.clusters.empty()) {
    std::vector<RxLogRecord> selected;
    for (const auto& [id, recs] : by_sender) selected.insert(selected.end(), recs.begin(), recs.end());
    const auto clusters = clusterBySender(selected, args.group);
    writeJson(args.clusters, emitGeoJson(std::span<const SenderCluster>(clusters)));
  }
  if (!args.csv.empty()) {
    auto out = openOut(args.csv);
    writeWindowsCsv(out, all_windows);
  }
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

// ---- scenario / trace -----------------------------------------------------

int scenarioRun(const std::string& config, const std::string& out_path) {
  const ScenarioConfig cfg = loadScenarioConfig(config);
  const auto events = runScenario(cfg);
  if (out_path.empty() || out_path == "-") {
    writeEventLog(std::cout, events);
  } else {
    auto out = openOut(out_path);
    writeEventLog(out, events);
  }
  size_t rx = 0;
  for (const auto& e : events) rx += e.type == EventType::Rx;
  std::cerr << "events " << events.size() << " rx " << rx << '\n';
  return kExitOk;
}

struct SynthArgs {
  double lat = 0, lon = 0, heading = 0, speed = 0, duration_s = 60;
  int64_t start_ms = 0, period_ms = 100;
  std::string out;
};

int traceSynth(const SynthArgs& a) {
  const Trace t = synthesizeStraightTrace(GeoPosition(a.lat, a.lon), a.heading, a.speed, a.start_ms,
                                          static_cast<int64_t>(std::llround(a.duration_s * 1000.0)), a.period_ms);
  if (a.out.empty() || a.out == "-") {
    writeTrace(std::cout, t);
  } else {
    auto out = openOut(a.out);
    writeTrace(out, t);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-ITS station testbed"};
  app.require_subcommand(1);

  StationArgs st;
  auto* station = app.add_subcommand("station", "run a station until interrupted");
  station->add_option("--config", st.config, "station YAML")->required()->check(CLI::ExistingFile);
  station->add_option("--gnss", st.gnss, "trace:<file> or gpsd:<host:port>");
  station->add_option("--ldm-port", st.ldm_port, "LDM API TCP port (0 = ephemeral)")->check(CLI::Range(0, 65535));
  station->add_option("--forced-period-ms", st.forced_period_ms, "fixed CAM period")->check(CLI::PositiveNumber);
  station->add_option("--transport", st.transport, "sim or udp:<group:port>[@iface]");
  station->add_option("--duration-s", st.duration_s, "stop after this many seconds (0 = until signal)")
      ->check(CLI::NonNegativeNumber);
  station->add_option("--replay-speed", st.replay_speed, "trace replay speed factor (0 = instant)")
      ->check(CLI::NonNegativeNumber);

  auto* scenario = app.add_subcommand("scenario", "simulated multi-station runs");
  scenario->require_subcommand(1);
  std::string sc_config, sc_out;
  auto* sc_run = scenario->add_subcommand("run", "run a scenario and write its event log");
  sc_run->add_option("--config", sc_config, "scenario YAML")->required();
  sc_run->add_option("--out", sc_out, "event log CSV (default stdout)");

  auto* analyze = app.add_subcommand("analyze", "offline analysis");
  analyze->require_subcommand(1);

  SpectrumArgs sp;
  auto* spectrum = analyze->add_subcommand("spectrum", "PSD and emission-mask check of an IQ capture");
  spectrum->add_option("--capture", sp.capture, "IQC1 capture")->required();
  spectrum->add_option("--mask", sp.mask, "emission mask file");
  spectrum->add_option("--nfft", sp.nfft, "FFT size")->check(CLI::PositiveNumber);
  spectrum->add_option("--impedance", sp.impedance, "reference impedance in ohm")->check(CLI::PositiveNumber);
  spectrum->add_option("--guard-db", sp.guard_db, "burst threshold above the noise median");
  spectrum->add_option("--window", sp.window, "burst detection window in samples")->check(CLI::PositiveNumber);
  spectrum->add_flag("--no-burst-filter", sp.no_burst_filter, "use every sample");
  spectrum->add_option("--out", sp.out, "JSON report (default stdout)");
  spectrum->add_option("--csv", sp.csv, "PSD as CSV");

  PowerArgs pw;
  auto* power = analyze->add_subcommand("power", "average power and input/output linearity");
  power->add_option("--sweep", pw.sweep, "CSV input_dbm,<output_dbm|capture>");
  power->add_option("--capture", pw.capture, "IQC1 capture");
  power->add_option("--impedance", pw.impedance, "reference impedance in ohm")->check(CLI::PositiveNumber);
  power->add_option("--guard-db", pw.guard_db, "burst threshold above the noise median");
  power->add_option("--window", pw.window, "burst detection window in samples")->check(CLI::PositiveNumber);
  power->add_flag("--no-burst-filter", pw.no_burst_filter, "use every sample");
  power->add_option("--out", pw.out, "JSON report (default stdout)");

  TrialArgs tr;
  auto* trial = analyze->add_subcommand("trial", "PDR windows, range and clusters from an RX log");
  trial->add_option("--log", tr.log, "RX log or scenario event log")->required();
  trial->add_option("--sender", tr.sender, "only this sender");
  trial->add_option("--receiver", tr.receiver, "only rows received by this station");
  trial->add_option("--tx-lat", tr.tx_lat, "transmitter latitude");
  trial->add_option("--tx-lon", tr.tx_lon, "transmitter longitude");
  trial->add_option("--tx-period-ms", tr.tx_period_ms, "CAM period")->check(CLI::PositiveNumber);
  trial->add_option("--window-ms", tr.window_ms, "PDR window")->check(CLI::PositiveNumber);
  trial->add_option("--rx-trace", tr.rx_trace, "receiver trace for empty windows");
  trial->add_option("--group", tr.group, "messages per cluster")->check(CLI::PositiveNumber);
  trial->add_option("--out", tr.out, "window GeoJSON");
  trial->add_option("--clusters", tr.clusters, "cluster GeoJSON");
  trial->add_option("--csv", tr.csv, "window CSV");

  SynthArgs sy;
  auto* trace = app.add_subcommand("trace", "trace utilities");
  trace->require_subcommand(1);
  auto* synth = trace->add_subcommand("synth", "straight constant-speed trace");
  synth->add_option("--lat", sy.lat)->required();
  synth->add_option("--lon", sy.lon)->required();
  synth->add_option("--heading", sy.heading, "degrees");
  synth->add_option("--speed", sy.speed, "m/s");
  synth->add_option("--duration-s", sy.duration_s)->check(CLI::PositiveNumber);
  synth->add_option("--start-ms", sy.start_ms);
  synth->add_option("--period-ms", sy.period_ms)->check(CLI::PositiveNumber);
  synth->add_option("--out", sy.out, "trace CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*station) return runStation(st);
    if (*sc_run) return scenarioRun(sc_config, sc_out);
    if (*spectrum) return analyzeSpectrum(sp);
    if (*power) return analyzePower(pw);
    if (*trial) return analyzeTrial(tr);
    if (*synth) return traceSynth(sy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
