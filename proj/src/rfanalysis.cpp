#include "citsbed/rfanalysis.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace citsbed {

namespace {

constexpr size_t kMaxHeaderBytes = 256;
constexpr size_t kPsdChunks = 8;

uint32_t loadLe32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void storeLe32(unsigned char* p, uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

template <typename T>
bool parseNumber(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Sum of |X_j|^2 / N^2 over the segments [first, last).
std::vector<double> accumulateSegments(std::span<const Complex> samples, const FftPlan& plan,
                                       size_t first, size_t last) {
  const size_t n = plan.size();
  const double norm = 1.0 / static_cast<double>(n);
  std::vector<double> acc(n, 0.0);
  std::vector<Complex> spectrum(n);
  for (size_t seg = first; seg < last; ++seg) {
    plan.forward(samples.subspan(seg * n, n), spectrum);
    for (size_t k = 0; k < n; ++k) acc[k] += std::norm(spectrum[k] * norm);
  }
  return acc;
}

}  // namespace

IqCapture readIqCapture(std::istream& in, const std::string& name) {
  std::string header;
  for (char c; header.size() < kMaxHeaderBytes && in.get(c);) {
    if (c == '\n') break;
    header.push_back(c);
  }
  if (header.size() >= kMaxHeaderBytes || !in) {
    throw FormatError(name, header.size(), "missing IQC1 header line");
  }
  std::istringstream tokens(header);
  std::string magic;
  tokens >> magic;
  if (magic != "IQC1") throw FormatError(name, 0, "bad magic '" + magic + "', expected IQC1");

  IqCapture cap;
  bool have_fs = false, have_fc = false, have_n = false;
  size_t count = 0;
  for (std::string tok; tokens >> tok;) {
    const auto eq = tok.find('=');
    const std::string key = tok.substr(0, eq);
    const std::string_view value = eq == std::string::npos ? std::string_view{} : std::string_view(tok).substr(eq + 1);
    const size_t at = header.find(tok);
    if (key == "fs" && parseNumber(value, cap.fs_hz)) {
      have_fs = true;
    } else if (key == "fc" && parseNumber(value, cap.fc_hz)) {
      have_fc = true;
    } else if (key == "n" && parseNumber(value, count)) {
      have_n = true;
    } else {
      throw FormatError(name, at, "unrecognized header field '" + tok + "'");
    }
  }
  if (!have_fs || !have_fc || !have_n) throw FormatError(name, 0, "header needs fs=, fc= and n=");
  if (!(cap.fs_hz > 0.0)) throw FormatError(name, 0, "fs must be positive");

  const size_t data_offset = header.size() + 1;
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  const auto got = static_cast<size_t>(in.gcount());
  if (got != raw.size()) {
    throw FormatError(name, data_offset + got,
                      "sample-count mismatch: expected " + std::to_string(count) + " samples, got " +
                          std::to_string(got / 8) + (got % 8 ? " and a partial sample" : ""));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(name, data_offset + got,
                      "sample-count mismatch: trailing bytes after " + std::to_string(count) + " samples");
  }
  cap.samples.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const float re = std::bit_cast<float>(loadLe32(&raw[i * 8]));
    const float im = std::bit_cast<float>(loadLe32(&raw[i * 8 + 4]));
    cap.samples[i] = {re, im};
  }
  return cap;
}

IqCapture loadIqCapture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return readIqCapture(in, path);
}

void writeIqCapture(std::ostream& out, const IqCapture& capture) {
  char header[kMaxHeaderBytes];
  std::snprintf(header, sizeof(header), "IQC1 fs=%.17g fc=%.17g n=%zu\n", capture.fs_hz, capture.fc_hz,
                capture.samples.size());
  out << header;
  std::vector<unsigned char> raw(capture.samples.size() * 8);
  for (size_t i = 0; i < capture.samples.size(); ++i) {
    storeLe32(&raw[i * 8], std::bit_cast<uint32_t>(static_cast<float>(capture.samples[i].real())));
    storeLe32(&raw[i * 8 + 4], std::bit_cast<uint32_t>(static_cast<float>(capture.samples[i].imag())));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void saveIqCapture(const std::string& path, const IqCapture& capture) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path, 0, "cannot create file");
  writeIqCapture(out, capture);
  if (!out) throw FormatError(path, 0, "write failed");
}

std::vector<SampleSegment> detectBursts(const IqCapture& capture, double guard_db, size_t window) {
  if (window == 0) throw std::invalid_argument("burst window must be at least one sample");
  const auto& x = capture.samples;
  const size_t n = x.size();
  if (n == 0) return {};

  std::vector<long double> prefix(n + 1, 0.0L);
  for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::norm(x[i]);

  std::vector<double> mean(n);
  const size_t half = window / 2;
  for (size_t i = 0; i < n; ++i) {
    const size_t lo = i >= half ? i - half : 0;
    const size_t hi = std::min(n, lo + window);
    mean[i] = static_cast<double>((prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo));
  }

  std::vector<double> sorted = mean;
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double threshold = *mid * std::pow(10.0, guard_db / 10.0);

  std::vector<SampleSegment> segments;
  for (size_t i = 0; i < n;) {
    if (!(mean[i] > threshold)) {
      ++i;
      continue;
    }
    const size_t begin = i;
    while (i < n && mean[i] > threshold) ++i;
    segments.push_back({begin, i});
  }
  return segments;
}

std::vector<Complex> extractSegments(std::span<const Complex> samples,
                                     std::span<const SampleSegment> segments) {
  std::vector<Complex> out;
  for (const auto& seg : segments) {
    if (seg.begin > seg.end || seg.end > samples.size()) throw std::out_of_range("segment out of bounds");
    out.insert(out.end(), samples.begin() + static_cast<std::ptrdiff_t>(seg.begin),
               samples.begin() + static_cast<std::ptrdiff_t>(seg.end));
  }
  return out;
}

PowerDbm computeAveragePowerDbm(std::span<const Complex> samples, double impedance_ohm) {
  if (samples.empty()) throw std::invalid_argument("average power of an empty sample set");
  if (!(impedance_ohm > 0.0)) throw std::invalid_argument("impedance must be positive");
  double energy = 0.0;
  for (const auto& s : samples) energy += std::norm(s);
  return {10.0 * std::log10(energy / (static_cast<double>(samples.size()) * impedance_ohm)) + 30.0};
}

PsdEstimate computePsd(std::span<const Complex> samples, size_t n_fft, double fs_hz, double fc_hz,
                       double impedance_ohm) {
  if (n_fft == 0) throw std::invalid_argument("n_fft must be positive");
  if (samples.size() < n_fft) {
    throw std::invalid_argument("PSD needs at least " + std::to_string(n_fft) + " samples, got " +
                                std::to_string(samples.size()));
  }
  if (!(fs_hz > 0.0) || !(impedance_ohm > 0.0)) {
    throw std::invalid_argument("sample rate and impedance must be positive");
  }
  const FftPlan plan(n_fft);
  const size_t n_segments = samples.size() / n_fft;

  // fixed chunking so the summation order never depends on the machine
  const size_t chunks = std::min(kPsdChunks, n_segments);
  std::vector<std::future<std::vector<double>>> parts;
  for (size_t c = 0; c < chunks; ++c) {
    const size_t first = n_segments * c / chunks;
    const size_t last = n_segments * (c + 1) / chunks;
    parts.push_back(std::async(chunks > 1 ? std::launch::async : std::launch::deferred,
                               accumulateSegments, samples, std::cref(plan), first, last));
  }
  std::vector<double> power(n_fft, 0.0);
  for (auto& part : parts) {
    const auto acc = part.get();
    for (size_t k = 0; k < n_fft; ++k) power[k] += acc[k];
  }

  PsdEstimate psd;
  psd.n_fft = n_fft;
  psd.n_segments = n_segments;
  psd.bin_width_hz = fs_hz / static_cast<double>(n_fft);
  psd.impedance_ohm = impedance_ohm;
  psd.fc_hz = fc_hz;
  psd.freqs_hz.resize(n_fft);
  psd.psd_dbm_per_hz.resize(n_fft);
  const auto shift = static_cast<std::ptrdiff_t>(n_fft / 2);
  const double denom = impedance_ohm * psd.bin_width_hz * static_cast<double>(n_segments);
  for (size_t s = 0; s < n_fft; ++s) {
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(s) - shift;
    const size_t k = static_cast<size_t>((offset + static_cast<std::ptrdiff_t>(n_fft)) %
                                         static_cast<std::ptrdiff_t>(n_fft));
    psd.freqs_hz[s] = fc_hz + static_cast<double>(offset) * psd.bin_width_hz;
    const double linear = std::max(power[k] / denom, std::numeric_limits<double>::min());
    psd.psd_dbm_per_hz[s] = 10.0 * std::log10(linear) + 30.0;
  }
  return psd;
}

double integratePsdWatts(const PsdEstimate& psd) {
  double total = 0.0;
  for (double p : psd.psd_dbm_per_hz) total += std::pow(10.0, (p - 30.0) / 10.0) * psd.bin_width_hz;
  return total;
}

EmissionMask::EmissionMask(std::vector<MaskPoint> breakpoints) : points_(std::move(breakpoints)) {
  if (points_.size() < 2) throw std::invalid_argument("emission mask needs at least two breakpoints");
  for (size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].offset_hz > points_[i - 1].offset_hz)) {
      throw std::invalid_argument("emission mask offsets must be strictly increasing");
    }
  }
  symmetric_ = points_.front().offset_hz >= 0.0;
}

bool EmissionMask::covers(double offset_hz) const {
  const double x = symmetric_ ? std::fabs(offset_hz) : offset_hz;
  return x >= points_.front().offset_hz && x <= points_.back().offset_hz;
}

double EmissionMask::limitAt(double offset_hz) const {
  const double x = symmetric_ ? std::fabs(offset_hz) : offset_hz;
  auto hi = std::lower_bound(points_.begin(), points_.end(), x,
                             [](const MaskPoint& p, double v) { return p.offset_hz < v; });
  if (hi == points_.begin()) return hi->limit_dbm_per_hz;
  if (hi == points_.end()) return points_.back().limit_dbm_per_hz;
  const auto lo = std::prev(hi);
  const double w = (x - lo->offset_hz) / (hi->offset_hz - lo->offset_hz);
  return lo->limit_dbm_per_hz + w * (hi->limit_dbm_per_hz - lo->limit_dbm_per_hz);
}

EmissionMask parseEmissionMask(std::istream& in, const std::string& name) {
  std::vector<MaskPoint> points;
  std::string line;
  size_t offset = 0;
  while (std::getline(in, line)) {
    const size_t line_offset = offset;
    offset += line.size() + 1;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    MaskPoint p;
    std::string extra;
    if (!(fields >> p.offset_hz)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError(name, line_offset, "expected 'offset_hz limit_dbm_per_hz'");
    }
    if (!(fields >> p.limit_dbm_per_hz) || (fields >> extra)) {
      throw FormatError(name, line_offset, "expected 'offset_hz limit_dbm_per_hz'");
    }
    points.push_back(p);
  }
  try {
    return EmissionMask(std::move(points));
  } catch (const std::invalid_argument& e) {
    throw FormatError(name, offset, e.what());
  }
}

EmissionMask loadEmissionMask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return parseEmissionMask(in, path);
}

MaskReport checkMask(const PsdEstimate& psd, const EmissionMask& mask) {
  MaskReport report;
  report.worst_margin_db = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < psd.freqs_hz.size(); ++i) {
    const double offset = psd.freqs_hz[i] - psd.fc_hz;
    if (!mask.covers(offset)) {
      ++report.bins_skipped;
      continue;
    }
    ++report.bins_checked;
    const double limit = mask.limitAt(offset);
    report.worst_margin_db = std::min(report.worst_margin_db, limit - psd.psd_dbm_per_hz[i]);
    if (psd.psd_dbm_per_hz[i] > limit) {
      report.violations.push_back({psd.freqs_hz[i], psd.psd_dbm_per_hz[i], limit});
    }
  }
  report.compliant = report.violations.empty();
  return report;
}

LinearityFit fitPowerLinearity(std::span<const PowerPoint> points) {
  if (points.size() < 2) throw std::invalid_argument("linearity fit needs at least two points");
  const double n = static_cast<double>(points.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.input_dbm;
    mean_y += p.output_dbm;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.input_dbm - mean_x) * (p.input_dbm - mean_x);
    sxy += (p.input_dbm - mean_x) * (p.output_dbm - mean_y);
  }
  if (sxx == 0.0) throw std::invalid_argument("linearity fit is degenerate: all inputs are equal");

  LinearityFit fit;
  fit.slope = sxy / sxx;
  fit.intercept_db = mean_y - fit.slope * mean_x;
  fit.offset_db = mean_x - mean_y;
  for (const auto& p : points) {
    fit.residuals_db.push_back(p.output_dbm - (fit.slope * p.input_dbm + fit.intercept_db));
    fit.offset_residuals_db.push_back(p.output_dbm - (p.input_dbm - fit.offset_db));
  }
  return fit;
}

}  // namespace citsbed
