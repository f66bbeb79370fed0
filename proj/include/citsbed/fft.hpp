#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace citsbed {

using Complex = std::complex<double>;

/// Forward DFT X_k = sum_n x_n exp(-j 2 pi k n / N), unnormalized, any N > 0.
/// Thin wrapper over an FFTW plan. Immutable after construction and safe to
/// share between threads.
class FftPlan {
 public:
  explicit FftPlan(size_t n);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  size_t size() const { return n_; }
  void forward(std::span<const Complex> in, std::span<Complex> out) const;
  std::vector<Complex> forward(std::span<const Complex> in) const;

 private:
  struct Impl;
  size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace citsbed
