#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace opbench::forge {

/// Real-to-complex transforms over a 1D or 2D periodic grid, backed by FFTW.
/// Forward is unnormalized; inverse divides by the number of points so that
/// inverse(forward(x)) == x.
class RealFft {
 public:
  explicit RealFft(std::vector<std::size_t> shape);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// Number of complex coefficients: n0 * (n_last / 2 + 1).
  std::size_t spectral_size() const { return spectral_size_; }
  std::size_t real_size() const { return real_size_; }
  const std::vector<std::size_t>& shape() const { return shape_; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::vector<std::size_t> shape_;
  std::size_t real_size_ = 0;
  std::size_t spectral_size_ = 0;
  std::vector<double> real_buf_;
  std::vector<std::complex<double>> spec_buf_;
  void* plan_fwd_ = nullptr;
  void* plan_inv_ = nullptr;
};

/// Signed integer wavenumber of FFT index i on an axis of length n.
inline long wavenumber(std::size_t i, std::size_t n) {
  return i <= n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

}  // namespace opbench::forge
