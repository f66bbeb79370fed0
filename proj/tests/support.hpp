#pragma once

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "citsbed/fft.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "citsbed-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void writeText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string readText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout only
};

inline CommandResult runCommand(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::vector<citsbed::Complex> randomSamples(std::mt19937_64& rng, size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<citsbed::Complex> x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  return x;
}

// O(N^2) reference DFT with exactly reduced phase indices.
inline std::vector<citsbed::Complex> bruteForceDft(const std::vector<citsbed::Complex>& x) {
  const size_t n = x.size();
  std::vector<citsbed::Complex> out(n);
  // the n distinct roots, each evaluated directly in long double
  std::vector<long double> cos_t(n), sin_t(n);
  for (size_t m = 0; m < n; ++m) {
    const long double ang = -2.0L * std::numbers::pi_v<long double> * m / n;
    cos_t[m] = std::cos(ang);
    sin_t[m] = std::sin(ang);
  }
  for (size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (size_t i = 0; i < n; ++i) {
      const size_t idx = (k * i) % n;
      const long double c = cos_t[idx], s = sin_t[idx];
      re += x[i].real() * c - x[i].imag() * s;
      im += x[i].real() * s + x[i].imag() * c;
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

// Capture whose single-segment PSD (1/N normalized DFT, fc-centred) equals
// target(offset_hz) at every bin, with random phases.
template <typename F>
std::vector<citsbed::Complex> synthesizeSpectrum(size_t n, double fs_hz, double impedance_ohm, F target,
                                                 std::mt19937_64& rng) {
  const double b = fs_hz / static_cast<double>(n);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<citsbed::Complex> y(n);
  for (size_t k = 0; k < n; ++k) {
    const double bins = k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    const double watts_per_hz = std::pow(10.0, (target(bins * b) - 30.0) / 10.0);
    // conj(Y) goes into the forward transform below
    y[k] = std::conj(std::polar(std::sqrt(watts_per_hz * impedance_ohm * b), phase(rng)));
  }
  auto x = citsbed::FftPlan(n).forward(y);
  for (auto& v : x) v = std::conj(v);
  return x;
}

}  // namespace testing
