#pragma once

// Rational-ratio polyphase resampler with a Kaiser-windowed sinc low-pass.
// Only downsampling (or identity) is supported.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fcntag/audio/clip.hpp"
#include "fcntag/error.hpp"

namespace fcntag::audio {

struct ResamplerDesign {
  double stopband_db = 80.0;
  // Passband edge as a fraction of the output Nyquist; the stopband begins at
  // the output Nyquist itself.
  double passband_fraction = 0.9;
};

class PolyphaseResampler {
 public:
  PolyphaseResampler(int source_rate, int target_rate, ResamplerDesign design = {})
      : source_rate_(source_rate), target_rate_(target_rate) {
    if (source_rate <= 0 || target_rate <= 0)
      throw Error(ErrorKind::invalid_input, "sample rates must be positive");
    if (target_rate > source_rate)
      throw Error(ErrorKind::unsupported_direction,
                  "upsampling from " + std::to_string(source_rate) + " Hz to " +
                      std::to_string(target_rate) + " Hz is not supported");
    int g = std::gcd(source_rate, target_rate);
    up_ = target_rate / g;
    down_ = source_rate / g;
    if (up_ == down_) return;

    const double fs_up = static_cast<double>(source_rate) * up_;
    const double nyquist_out = 0.5 * target_rate;
    const double f_pass = design.passband_fraction * nyquist_out;
    const double f_stop = nyquist_out;
    const double cutoff = 0.5 * (f_pass + f_stop) / fs_up;  // cycles/sample at the upsampled rate
    const double delta_w = 2.0 * std::numbers::pi * (f_stop - f_pass) / fs_up;
    const double a = design.stopband_db;
    const double beta = a > 50.0 ? 0.1102 * (a - 8.7)
                                 : (a >= 21.0 ? 0.5842 * std::pow(a - 21.0, 0.4) + 0.07886 * (a - 21.0) : 0.0);
    auto taps = static_cast<std::int64_t>(std::ceil((a - 7.95) / (2.285 * delta_w))) + 1;
    if (taps % 2 == 0) ++taps;

    taps_.resize(static_cast<std::size_t>(taps));
    center_ = (taps - 1) / 2;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);
    for (std::int64_t i = 0; i < taps; ++i) {
      double x = static_cast<double>(i - center_);
      double arg = 2.0 * cutoff * x;
      double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      double r = x / static_cast<double>(center_);
      double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      taps_[static_cast<std::size_t>(i)] = up_ * 2.0 * cutoff * sinc * window;
    }
  }

  int up() const { return up_; }
  int down() const { return down_; }
  std::size_t tap_count() const { return taps_.size(); }

  std::size_t output_length(std::size_t input_length) const {
    auto n = static_cast<std::uint64_t>(input_length);
    return static_cast<std::size_t>((2 * n * static_cast<std::uint64_t>(up_) + down_) /
                                    (2 * static_cast<std::uint64_t>(down_)));
  }

  std::vector<double> process(const std::vector<double>& input) const {
    if (up_ == down_) return input;
    const auto n_in = static_cast<std::int64_t>(input.size());
    const auto n_taps = static_cast<std::int64_t>(taps_.size());
    std::vector<double> out(output_length(input.size()));
    for (std::size_t j = 0; j < out.size(); ++j) {
      // Position of output sample j on the upsampled grid, shifted to the filter center.
      std::int64_t u = static_cast<std::int64_t>(j) * down_ + center_;
      std::int64_t k_hi = std::min<std::int64_t>(u / up_, n_in - 1);
      std::int64_t lo_num = u - n_taps + 1;
      std::int64_t k_lo = lo_num <= 0 ? 0 : (lo_num + up_ - 1) / up_;
      double acc = 0.0;
      for (std::int64_t k = k_lo; k <= k_hi; ++k)
        acc += input[static_cast<std::size_t>(k)] * taps_[static_cast<std::size_t>(u - k * up_)];
      out[j] = acc;
    }
    return out;
  }

 private:
  int source_rate_;
  int target_rate_;
  int up_ = 1;
  int down_ = 1;
  std::int64_t center_ = 0;
  std::vector<double> taps_;
};

/// Converts a clip to `target_rate` with an anti-aliasing low-pass applied
/// before decimation.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.samples.empty()) throw Error(ErrorKind::invalid_input, "cannot resample an empty clip");
  if (target_rate <= 0) throw Error(ErrorKind::invalid_input, "target rate must be positive");
  if (clip.sample_rate <= 0) throw Error(ErrorKind::invalid_input, "source rate must be positive");
  PolyphaseResampler resampler(clip.sample_rate, target_rate);
  return AudioClip{resampler.process(clip.samples), target_rate};
}

}  // namespace fcntag::audio
