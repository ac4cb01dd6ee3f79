#include "dislo/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace dislo {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft1D::RealFft1D(std::size_t n) : n_(n) {
  if (n < 2) throw std::invalid_argument("RealFft1D needs at least 2 points");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(n_);
  auto* freq = fftw_alloc_complex(spectrum_size());
  freq_ = freq;
  const int ni = static_cast<int>(n_);
  forward_ = fftw_plan_dft_r2c_1d(ni, real_, freq, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_1d(ni, freq, real_, FFTW_ESTIMATE);
}

RealFft1D::~RealFft1D() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_));
  fftw_free(real_);
  fftw_free(freq_);
}

void RealFft1D::apply_symbol(std::span<const double> in, std::span<const double> symbol,
                             std::span<double> out) {
  if (in.size() != n_ || out.size() != n_ || symbol.size() != spectrum_size())
    throw std::invalid_argument("RealFft1D::apply_symbol size mismatch");
  std::copy(in.begin(), in.end(), real_);
  fftw_execute(static_cast<fftw_plan>(forward_));
  auto* freq = static_cast<fftw_complex*>(freq_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < spectrum_size(); ++k) {
    freq[k][0] *= symbol[k] * scale;
    freq[k][1] *= symbol[k] * scale;
  }
  fftw_execute(static_cast<fftw_plan>(backward_));
  std::copy(real_, real_ + n_, out.begin());
}

RealFft2D::RealFft2D(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("RealFft2D needs at least 2x2 points");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(nx_ * ny_);
  auto* freq = fftw_alloc_complex(spectrum_size());
  freq_ = freq;
  // FFTW is row-major with the last index fastest: dims are (ny, nx).
  const int n0 = static_cast<int>(ny_);
  const int n1 = static_cast<int>(nx_);
  forward_ = fftw_plan_dft_r2c_2d(n0, n1, real_, freq, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_2d(n0, n1, freq, real_, FFTW_ESTIMATE);
}

RealFft2D::~RealFft2D() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_));
  fftw_free(real_);
  fftw_free(freq_);
}

std::vector<std::complex<double>> RealFft2D::forward(std::span<const double> in) {
  if (in.size() != nx_ * ny_) throw std::invalid_argument("RealFft2D::forward size mismatch");
  std::copy(in.begin(), in.end(), real_);
  fftw_execute(static_cast<fftw_plan>(forward_));
  auto* freq = static_cast<fftw_complex*>(freq_);
  std::vector<std::complex<double>> out(spectrum_size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {freq[k][0], freq[k][1]};
  return out;
}

void RealFft2D::convolve(std::span<const std::complex<double>> kernel_spectrum,
                         std::span<const double> in, std::span<double> out) {
  if (in.size() != nx_ * ny_ || out.size() != nx_ * ny_ ||
      kernel_spectrum.size() != spectrum_size())
    throw std::invalid_argument("RealFft2D::convolve size mismatch");
  std::copy(in.begin(), in.end(), real_);
  fftw_execute(static_cast<fftw_plan>(forward_));
  auto* freq = static_cast<fftw_complex*>(freq_);
  const double scale = 1.0 / static_cast<double>(nx_ * ny_);
  for (std::size_t k = 0; k < spectrum_size(); ++k) {
    const std::complex<double> v{freq[k][0], freq[k][1]};
    const auto w = v * kernel_spectrum[k] * scale;
    freq[k][0] = w.real();
    freq[k][1] = w.imag();
  }
  fftw_execute(static_cast<fftw_plan>(backward_));
  std::copy(real_, real_ + nx_ * ny_, out.begin());
}

}  // namespace dislo
