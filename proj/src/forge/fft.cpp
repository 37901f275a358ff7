#include "opbench/forge/fft.hpp"

#include <algorithm>
#include <mutex>

#include <fftw3.h>

#include "opbench/errors.hpp"

namespace opbench::forge {

namespace {
// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2) throw ConfigError("RealFft supports 1D and 2D grids");
  real_size_ = 1;
  for (auto n : shape_) real_size_ *= n;
  spectral_size_ = real_size_ / shape_.back() * (shape_.back() / 2 + 1);
  real_buf_.resize(real_size_);
  spec_buf_.resize(spectral_size_);
  auto* r = real_buf_.data();
  auto* c = reinterpret_cast<fftw_complex*>(spec_buf_.data());
  std::lock_guard lock(planner_mutex());
  if (shape_.size() == 1) {
    const int n = static_cast<int>(shape_[0]);
    plan_fwd_ = fftw_plan_dft_r2c_1d(n, r, c, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_1d(n, c, r, FFTW_ESTIMATE);
  } else {
    const int n0 = static_cast<int>(shape_[0]), n1 = static_cast<int>(shape_[1]);
    plan_fwd_ = fftw_plan_dft_r2c_2d(n0, n1, r, c, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_2d(n0, n1, c, r, FFTW_ESTIMATE);
  }
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.end(), real_buf_.begin());
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::copy(spec_buf_.begin(), spec_buf_.end(), out.begin());
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  // c2r destroys its input, so always work on the private buffer.
  std::copy(in.begin(), in.end(), spec_buf_.begin());
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  const double scale = 1.0 / static_cast<double>(real_size_);
  for (std::size_t i = 0; i < real_size_; ++i) out[i] = real_buf_[i] * scale;
}

}  // namespace opbench::forge
