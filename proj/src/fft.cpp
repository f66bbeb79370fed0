#include "citsbed/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <limits>
#include <mutex>
#include <stdexcept>

namespace citsbed {

namespace {

// FFTW's planner is not reentrant; executing an existing plan is.
std::mutex& plannerMutex() {
  static std::mutex m;
  return m;
}

fftw_complex* asFftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

struct FftPlan::Impl {
  fftw_plan plan = nullptr;
};

FftPlan::FftPlan(size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n == 0) throw std::invalid_argument("FFT size must be positive");
  if (n > static_cast<size_t>(std::numeric_limits<int>::max())) throw std::invalid_argument("FFT size too large");
  // in-place, unaligned: forward() runs it on whatever buffer the caller hands over
  std::vector<Complex> scratch(n);
  std::lock_guard lock(plannerMutex());
  impl_->plan = fftw_plan_dft_1d(static_cast<int>(n), asFftw(scratch.data()), asFftw(scratch.data()), FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!impl_->plan) throw std::runtime_error("FFTW could not plan size " + std::to_string(n));
}

FftPlan::~FftPlan() {
  if (!impl_ || !impl_->plan) return;
  std::lock_guard lock(plannerMutex());
  fftw_destroy_plan(impl_->plan);
}

void FftPlan::forward(std::span<const Complex> in, std::span<Complex> out) const {
  if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("FFT buffer size mismatch");
  if (in.data() != out.data()) std::copy(in.begin(), in.end(), out.begin());
  fftw_execute_dft(impl_->plan, asFftw(out.data()), asFftw(out.data()));
}

std::vector<Complex> FftPlan::forward(std::span<const Complex> in) const {
  std::vector<Complex> out(n_);
  forward(in, out);
  return out;
}

}  // namespace citsbed
