#pragma once

// Post-processing of baseband IQ captures: burst/noise separation, power
// spectral density, emission-mask compliance, average power and
// input/output power linearity.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "citsbed/core.hpp"
#include "citsbed/fft.hpp"

namespace citsbed {

inline constexpr double kDefaultImpedanceOhm = 50.0;
inline constexpr size_t kDefaultFftSize = 65536;
inline constexpr double kDefaultGuardDb = 10.0;

/// Malformed input file; carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& file, size_t offset, const std::string& what)
      : std::runtime_error(file + " @" + std::to_string(offset) + ": " + what),
        file_(file),
        offset_(offset) {}
  const std::string& file() const { return file_; }
  size_t offset() const { return offset_; }

 private:
  std::string file_;
  size_t offset_;
};

struct IqCapture {
  double fs_hz = 0.0;
  double fc_hz = 0.0;
  std::vector<Complex> samples;  // x_i = p_i + j q_i, volts across the reference impedance
};

/// IQC1: ASCII header `IQC1 fs=<hz> fc=<hz> n=<count>\n`, then n
/// little-endian float32 pairs (I, Q).
IqCapture readIqCapture(std::istream& in, const std::string& name = "<stream>");
IqCapture loadIqCapture(const std::string& path);
void writeIqCapture(std::ostream& out, const IqCapture& capture);
void saveIqCapture(const std::string& path, const IqCapture& capture);

/// Half-open sample range [begin, end).
struct SampleSegment {
  size_t begin = 0;
  size_t end = 0;
  bool operator==(const SampleSegment&) const = default;
};

/// Runs of samples whose centred sliding mean power over `window` samples
/// exceeds median(sliding means) + guard_db. Sorted, disjoint, in bounds.
std::vector<SampleSegment> detectBursts(const IqCapture& capture, double guard_db, size_t window);

/// Concatenation of the samples inside `segments`.
std::vector<Complex> extractSegments(std::span<const Complex> samples,
                                     std::span<const SampleSegment> segments);

/// 10*log10(sum|x_i|^2 / (N_s * R)) + 30. Throws std::invalid_argument on empty input.
PowerDbm computeAveragePowerDbm(std::span<const Complex> samples, double impedance_ohm);

struct PsdEstimate {
  std::vector<double> freqs_hz;  // absolute, fc-centred, strictly increasing
  std::vector<double> psd_dbm_per_hz;
  size_t n_fft = 0;
  size_t n_segments = 0;
  double bin_width_hz = 0.0;  // b = fs / N_F
  double fc_hz = 0.0;
  double impedance_ohm = kDefaultImpedanceOhm;
};

/// Averaged periodogram over floor(N_s / n_fft) rectangular segments with a
/// 1/N_F normalized DFT; P(f_j) = 10*log10(|X_j|^2 / (R*b)) + 30.
/// Throws std::invalid_argument when fewer than n_fft samples are given.
PsdEstimate computePsd(std::span<const Complex> samples, size_t n_fft, double fs_hz, double fc_hz,
                       double impedance_ohm = kDefaultImpedanceOhm);

/// Total power of a PSD in watts: sum_j 10^((P_j - 30)/10) * b.
double integratePsdWatts(const PsdEstimate& psd);

struct MaskPoint {
  double offset_hz = 0.0;
  double limit_dbm_per_hz = 0.0;
};

/// Piecewise-linear limit in (Hz, dB). With only non-negative offsets the
/// mask is mirrored around the carrier.
class EmissionMask {
 public:
  explicit EmissionMask(std::vector<MaskPoint> breakpoints);

  bool symmetric() const { return symmetric_; }
  const std::vector<MaskPoint>& breakpoints() const { return points_; }
  bool covers(double offset_hz) const;
  /// Interpolated limit; only meaningful where covers() is true.
  double limitAt(double offset_hz) const;

 private:
  std::vector<MaskPoint> points_;
  bool symmetric_ = false;
};

/// Text format: one `offset_hz limit_dbm_per_hz` pair per line, '#' comments.
EmissionMask parseEmissionMask(std::istream& in, const std::string& name = "<mask>");
EmissionMask loadEmissionMask(const std::string& path);

struct MaskViolation {
  double freq_hz = 0.0;
  double psd_dbm_per_hz = 0.0;
  double limit_dbm_per_hz = 0.0;
};

struct MaskReport {
  bool compliant = true;
  std::vector<MaskViolation> violations;
  size_t bins_checked = 0;
  size_t bins_skipped = 0;  // outside the mask extent
  double worst_margin_db = 0.0;  // min(limit - psd) over checked bins
};

/// Compares every bin inside the mask extent against the interpolated limit;
/// a bin violates when its PSD is strictly above the limit.
MaskReport checkMask(const PsdEstimate& psd, const EmissionMask& mask);

struct LinearityFit {
  // ordinary least squares output = slope * input + intercept
  double slope = 0.0;
  double intercept_db = 0.0;
  std::vector<double> residuals_db;
  // slope fixed at 1: offset = mean(input - output)
  double offset_db = 0.0;
  std::vector<double> offset_residuals_db;
};

struct PowerPoint {
  double input_dbm = 0.0;
  double output_dbm = 0.0;
};

/// Throws std::invalid_argument with fewer than two distinct inputs.
LinearityFit fitPowerLinearity(std::span<const PowerPoint> points);

}  // namespace citsbed
