#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "fcntag/error.hpp"

namespace fcntag::audio {

/// Precomputed forward transform of fixed size. Power-of-two sizes use an
/// iterative radix-2 kernel; other sizes fall back to a direct DFT.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw Error(ErrorKind::invalid_config, "FFT size must be positive");
    pow2_ = (n & (n - 1)) == 0;
    twiddle_.resize(pow2_ ? n / 2 : n);
    for (std::size_t k = 0; k < twiddle_.size(); ++k) {
      double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    if (pow2_) {
      bitrev_.resize(n);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n) ++bits;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b)
          if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
        bitrev_[i] = r;
      }
    }
  }

  std::size_t size() const { return n_; }

  /// In-place forward transform, no normalization.
  void forward(std::span<std::complex<double>> data) const {
    if (data.size() != n_) throw Error(ErrorKind::shape, "FFT input length mismatch");
    if (!pow2_) {
      dft(data);
      return;
    }
    for (std::size_t i = 0; i < n_; ++i)
      if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      std::size_t half = len / 2;
      std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          auto t = twiddle_[k * step] * data[start + k + half];
          auto u = data[start + k];
          data[start + k] = u + t;
          data[start + k + half] = u - t;
        }
      }
    }
  }

  /// Magnitudes of bins 0..n/2 of a real frame.
  void magnitude(std::span<const double> frame, std::span<double> out,
                 std::vector<std::complex<double>>& scratch) const {
    scratch.assign(frame.begin(), frame.end());
    forward(scratch);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(scratch[k]);
  }

 private:
  void dft(std::span<std::complex<double>> data) const {
    std::vector<std::complex<double>> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      std::complex<double> acc{};
      for (std::size_t t = 0; t < n_; ++t) acc += data[t] * twiddle_[(k * t) % n_];
      out[k] = acc;
    }
    std::copy(out.begin(), out.end(), data.begin());
  }

  std::size_t n_;
  bool pow2_ = false;
  std::vector<std::complex<double>> twiddle_;
  std::vector<std::size_t> bitrev_;
};

}  // namespace fcntag::audio
