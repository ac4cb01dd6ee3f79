#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dislo {

// Thin RAII wrappers over FFTW real-to-complex transforms. Plans are made
// once per object (under a global planner lock); execution uses private
// buffers, so one object per thread.

class RealFft1D {
 public:
  explicit RealFft1D(std::size_t n);
  ~RealFft1D();
  RealFft1D(const RealFft1D&) = delete;
  RealFft1D& operator=(const RealFft1D&) = delete;

  std::size_t size() const { return n_; }
  std::size_t spectrum_size() const { return n_ / 2 + 1; }

  /// out = IFFT(symbol * FFT(in)), symbol indexed by nonnegative wavenumber.
  void apply_symbol(std::span<const double> in, std::span<const double> symbol,
                    std::span<double> out);

 private:
  std::size_t n_;
  double* real_ = nullptr;
  void* freq_ = nullptr;
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

/// Row-major (ny rows of nx) real grid.
class RealFft2D {
 public:
  RealFft2D(std::size_t nx, std::size_t ny);
  ~RealFft2D();
  RealFft2D(const RealFft2D&) = delete;
  RealFft2D& operator=(const RealFft2D&) = delete;

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  /// ny * (nx / 2 + 1) complex coefficients.
  std::size_t spectrum_size() const { return ny_ * (nx_ / 2 + 1); }

  std::vector<std::complex<double>> forward(std::span<const double> in);
  /// out = IFFT(kernel_spectrum * FFT(in)) / (nx ny); a circular convolution
  /// when kernel_spectrum = forward(kernel).
  void convolve(std::span<const std::complex<double>> kernel_spectrum,
                std::span<const double> in, std::span<double> out);

 private:
  std::size_t nx_, ny_;
  double* real_ = nullptr;
  void* freq_ = nullptr;
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

}  // namespace dislo
