#pragma once

// Time-frequency front end: log STFT magnitude, log mel-spectrogram, and
// stacked MFCCs with first and second deltas.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fcntag/audio/clip.hpp"
#include "fcntag/audio/fft.hpp"
#include "fcntag/audio/resample.hpp"
#include "fcntag/error.hpp"

namespace fcntag::audio {

inline constexpr double kLogFloor = 1e-10;

struct FrontendConfig {
  int target_rate = 12000;
  int n_fft = 256;
  int hop = 256;
  int n_frames = 1366;
  int n_mels = 96;
  int n_mfcc = 30;
  double fmin = 0.0;
  double fmax = 6000.0;

  int stft_bins() const { return n_fft / 2 + 1; }
  std::size_t clip_length() const { return static_cast<std::size_t>(n_frames) * static_cast<std::size_t>(hop); }

  /// Canonical `key=value` text; the digest below is computed over it.
  std::string canonical() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "target_rate=%d;n_fft=%d;hop=%d;n_frames=%d;n_mels=%d;n_mfcc=%d;fmin=%.17g;fmax=%.17g",
                  target_rate, n_fft, hop, n_frames, n_mels, n_mfcc, fmin, fmax);
    return buf;
  }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t config_hash(const FrontendConfig& cfg) { return fnv1a64(cfg.canonical()); }

inline void validate(const FrontendConfig& cfg) {
  auto bad = [](const std::string& why) { return Error(ErrorKind::invalid_config, why); };
  if (cfg.target_rate <= 0) throw bad("target_rate must be positive");
  if (cfg.n_fft <= 0 || cfg.hop <= 0 || cfg.n_frames <= 0) throw bad("n_fft, hop and n_frames must be positive");
  if (cfg.hop > cfg.n_fft) throw bad("hop must not exceed n_fft");
  if (cfg.n_mels <= 0 || cfg.n_mels > cfg.stft_bins())
    throw bad("n_mels = " + std::to_string(cfg.n_mels) + " exceeds n_fft/2+1 = " + std::to_string(cfg.stft_bins()));
  if (cfg.n_mfcc <= 0 || cfg.n_mfcc > cfg.n_mels) throw bad("n_mfcc must be in [1, n_mels]");
  if (!(cfg.fmin >= 0.0) || !(cfg.fmin < cfg.fmax) || cfg.fmax > 0.5 * cfg.target_rate)
    throw bad("require 0 <= fmin < fmax <= target_rate/2");
}

/// Config with `fmax` following the target rate, as the defaults do.
inline FrontendConfig make_config(int target_rate = 12000, int n_frames = 1366) {
  FrontendConfig cfg;
  cfg.target_rate = target_rate;
  cfg.n_frames = n_frames;
  cfg.fmax = 0.5 * target_rate;
  return cfg;
}

enum class FeatureKind : std::uint8_t { log_mel = 0, log_stft = 1, mfcc_stack = 2 };

inline const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::log_mel: return "mel";
    case FeatureKind::log_stft: return "stft";
    case FeatureKind::mfcc_stack: return "mfcc";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "mel") return FeatureKind::log_mel;
  if (name == "stft") return FeatureKind::log_stft;
  if (name == "mfcc") return FeatureKind::mfcc_stack;
  throw Error(ErrorKind::invalid_request, "unknown input kind '" + std::string(name) + "' (expected mel, stft or mfcc)");
}

inline int band_count_for(FeatureKind kind, const FrontendConfig& cfg) {
  switch (kind) {
    case FeatureKind::log_mel: return cfg.n_mels;
    case FeatureKind::log_stft: return cfg.stft_bins();
    case FeatureKind::mfcc_stack: return 3 * cfg.n_mfcc;
  }
  return 0;
}

/// Bands x frames matrix stored band-major.
struct FeatureMatrix {
  std::vector<float> data;
  FeatureKind kind = FeatureKind::log_mel;
  int band_count = 0;
  int frame_count = 0;
  std::uint64_t config_hash = 0;

  float& at(int band, int frame) { return data[static_cast<std::size_t>(band) * frame_count + frame]; }
  float at(int band, int frame) const { return data[static_cast<std::size_t>(band) * frame_count + frame]; }
  std::span<const float> band(int b) const {
    return {data.data() + static_cast<std::size_t>(b) * frame_count, static_cast<std::size_t>(frame_count)};
  }

  bool operator==(const FeatureMatrix&) const = default;
};

/// Zero-pads or truncates at the end to exactly n_frames * hop samples.
inline AudioClip pad_or_trim(const AudioClip& clip, const FrontendConfig& cfg) {
  if (clip.sample_rate != cfg.target_rate)
    throw Error(ErrorKind::contract, "pad_or_trim expects a clip at " + std::to_string(cfg.target_rate) + " Hz, got " +
                                         std::to_string(clip.sample_rate) + " Hz");
  AudioClip out{clip.samples, clip.sample_rate};
  out.samples.resize(cfg.clip_length(), 0.0);
  return out;
}

namespace detail {

inline void check_prepared(const AudioClip& clip, const FrontendConfig& cfg) {
  validate(cfg);
  if (clip.sample_rate != cfg.target_rate)
    throw Error(ErrorKind::contract, "clip rate " + std::to_string(clip.sample_rate) + " Hz does not match config rate " +
                                         std::to_string(cfg.target_rate) + " Hz");
  if (clip.samples.size() != cfg.clip_length())
    throw Error(ErrorKind::contract, "clip length " + std::to_string(clip.samples.size()) + " != n_frames*hop = " +
                                         std::to_string(cfg.clip_length()));
}

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

/// Magnitude spectrogram, bins x frames, row-major.
inline std::vector<double> magnitude_spectrogram(const AudioClip& clip, const FrontendConfig& cfg) {
  const int bins = cfg.stft_bins();
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  const auto frames = static_cast<std::size_t>(cfg.n_frames);
  FftPlan plan(n_fft);
  auto window = hann_window(cfg.n_fft);
  std::vector<double> frame(n_fft);
  std::vector<double> mags(static_cast<std::size_t>(bins));
  std::vector<std::complex<double>> scratch;
  std::vector<double> out(static_cast<std::size_t>(bins) * frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t start = t * static_cast<std::size_t>(cfg.hop);
    for (std::size_t i = 0; i < n_fft; ++i) {
      std::size_t s = start + i;
      frame[i] = s < clip.samples.size() ? clip.samples[s] * window[i] : 0.0;
    }
    plan.magnitude(frame, mags, scratch);
    for (std::size_t k = 0; k < mags.size(); ++k) out[k * frames + t] = mags[k];
  }
  return out;
}

inline double mel_from_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double hz_from_mel(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Antiderivative of the unit-peak triangle (lo, mid, hi).
inline double triangle_integral(double f, double lo, double mid, double hi) {
  if (f <= lo) return 0.0;
  if (f <= mid) return (f - lo) * (f - lo) / (2.0 * (mid - lo));
  double left = 0.5 * (mid - lo);
  if (f <= hi) return left + ((hi - mid) * (hi - mid) - (hi - f) * (hi - f)) / (2.0 * (hi - mid));
  return 0.5 * (hi - lo);
}

}  // namespace detail

using detail::hz_from_mel;
using detail::mel_from_hz;

struct MelFilterbank {
  std::vector<double> weights;  // n_mels x n_bins, row-major
  std::vector<double> center_freqs;
  int n_mels = 0;
  int n_bins = 0;

  double weight(int mel, int bin) const { return weights[static_cast<std::size_t>(mel) * n_bins + bin]; }
};

/// Triangular filters with centers uniformly spaced on the HTK mel scale.
/// Each weight is the triangle's integral over the STFT bin's frequency cell,
/// so narrow low-frequency filters still land on at least one bin; rows are
/// then normalized to sum to 1.
inline MelFilterbank mel_filterbank(const FrontendConfig& cfg) {
  validate(cfg);
  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = cfg.stft_bins();
  const double m_lo = mel_from_hz(cfg.fmin);
  const double m_hi = mel_from_hz(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = hz_from_mel(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));

  const double bin_hz = static_cast<double>(cfg.target_rate) / cfg.n_fft;
  fb.weights.assign(static_cast<std::size_t>(fb.n_mels) * fb.n_bins, 0.0);
  fb.center_freqs.resize(static_cast<std::size_t>(fb.n_mels));
  for (int m = 0; m < fb.n_mels; ++m) {
    double lo = edges[static_cast<std::size_t>(m)];
    double mid = edges[static_cast<std::size_t>(m) + 1];
    double hi = edges[static_cast<std::size_t>(m) + 2];
    fb.center_freqs[static_cast<std::size_t>(m)] = mid;
    double row_sum = 0.0;
    for (int k = 0; k < fb.n_bins; ++k) {
      double a = (k - 0.5) * bin_hz;
      double b = (k + 0.5) * bin_hz;
      double w = detail::triangle_integral(b, lo, mid, hi) - detail::triangle_integral(a, lo, mid, hi);
      fb.weights[static_cast<std::size_t>(m) * fb.n_bins + k] = w;
      row_sum += w;
    }
    if (!(row_sum > 0.0))
      throw Error(ErrorKind::invalid_config, "mel filter " + std::to_string(m) + " covers no STFT bin");
    for (int k = 0; k < fb.n_bins; ++k) fb.weights[static_cast<std::size_t>(m) * fb.n_bins + k] /= row_sum;
  }
  return fb;
}

inline FeatureMatrix make_feature(FeatureKind kind, int bands, const FrontendConfig& cfg) {
  FeatureMatrix fm;
  fm.kind = kind;
  fm.band_count = bands;
  fm.frame_count = cfg.n_frames;
  fm.config_hash = config_hash(cfg);
  fm.data.resize(static_cast<std::size_t>(bands) * cfg.n_frames);
  return fm;
}

/// log(|STFT| + 1e-10), (n_fft/2+1) x n_frames. Expects a resampled, padded clip.
inline FeatureMatrix stft_log(const AudioClip& clip, const FrontendConfig& cfg) {
  detail::check_prepared(clip, cfg);
  auto mags = detail::magnitude_spectrogram(clip, cfg);
  auto fm = make_feature(FeatureKind::log_stft, cfg.stft_bins(), cfg);
  for (std::size_t i = 0; i < mags.size(); ++i) fm.data[i] = static_cast<float>(std::log(mags[i] + kLogFloor));
  return fm;
}

namespace detail {

// Mel power spectrogram (before the log), n_mels x n_frames.
inline std::vector<double> mel_power(const AudioClip& clip, const FrontendConfig& cfg) {
  auto mags = magnitude_spectrogram(clip, cfg);
  auto fb = mel_filterbank(cfg);
  const auto frames = static_cast<std::size_t>(cfg.n_frames);
  std::vector<double> out(static_cast<std::size_t>(fb.n_mels) * frames, 0.0);
  for (int m = 0; m < fb.n_mels; ++m) {
    double* row = out.data() + static_cast<std::size_t>(m) * frames;
    for (int k = 0; k < fb.n_bins; ++k) {
      double w = fb.weight(m, k);
      if (w == 0.0) continue;
      const double* mag = mags.data() + static_cast<std::size_t>(k) * frames;
      for (std::size_t t = 0; t < frames; ++t) row[t] += w * mag[t] * mag[t];
    }
  }
  return out;
}

}  // namespace detail

/// log(mel_filterbank * |STFT|^2 + 1e-10), n_mels x n_frames.
inline FeatureMatrix melspectrogram_log(const AudioClip& clip, const FrontendConfig& cfg) {
  detail::check_prepared(clip, cfg);
  auto power = detail::mel_power(clip, cfg);
  auto fm = make_feature(FeatureKind::log_mel, cfg.n_mels, cfg);
  for (std::size_t i = 0; i < power.size(); ++i) fm.data[i] = static_cast<float>(std::log(power[i] + kLogFloor));
  return fm;
}

/// Orthonormal DCT-II, first `n_out` coefficients.
inline std::vector<double> dct_ii(std::span<const double> x, int n_out) {
  const auto n = static_cast<double>(x.size());
  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (int k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      acc += x[i] * std::cos(std::numbers::pi * k * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n));
    out[static_cast<std::size_t>(k)] = acc * (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
  }
  return out;
}

/// Regression deltas along time with half-width `half` (9-point at 4);
/// out-of-range frames replicate the nearest edge frame. rows x frames, row-major.
inline std::vector<double> deltas(std::span<const double> x, int rows, int frames, int half = 4) {
  double denom = 0.0;
  for (int n = 1; n <= half; ++n) denom += 2.0 * n * n;
  std::vector<double> out(x.size());
  for (int r = 0; r < rows; ++r) {
    const double* row = x.data() + static_cast<std::size_t>(r) * frames;
    for (int t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (int n = 1; n <= half; ++n) {
        int fwd = std::min(t + n, frames - 1);
        int bwd = std::max(t - n, 0);
        acc += n * (row[fwd] - row[bwd]);
      }
      out[static_cast<std::size_t>(r) * frames + t] = acc / denom;
    }
  }
  return out;
}

/// Rows 0..n_mfcc-1: DCT of log-mel; next n_mfcc: deltas; last n_mfcc: delta-deltas.
inline FeatureMatrix mfcc_from_log_mel(std::span<const double> log_mel, const FrontendConfig& cfg) {
  const int frames = cfg.n_frames;
  const int n_mfcc = cfg.n_mfcc;
  std::vector<double> coeffs(static_cast<std::size_t>(n_mfcc) * frames);
  std::vector<double> column(static_cast<std::size_t>(cfg.n_mels));
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < cfg.n_mels; ++m)
      column[static_cast<std::size_t>(m)] = log_mel[static_cast<std::size_t>(m) * frames + t];
    auto c = dct_ii(column, n_mfcc);
    for (int k = 0; k < n_mfcc; ++k) coeffs[static_cast<std::size_t>(k) * frames + t] = c[static_cast<std::size_t>(k)];
  }
  auto d1 = deltas(coeffs, n_mfcc, frames);
  auto d2 = deltas(d1, n_mfcc, frames);
  auto fm = make_feature(FeatureKind::mfcc_stack, 3 * n_mfcc, cfg);
  const std::size_t block = coeffs.size();
  for (std::size_t i = 0; i < block; ++i) {
    fm.data[i] = static_cast<float>(coeffs[i]);
    fm.data[block + i] = static_cast<float>(d1[i]);
    fm.data[2 * block + i] = static_cast<float>(d2[i]);
  }
  return fm;
}

inline FeatureMatrix mfcc_stack(const AudioClip& clip, const FrontendConfig& cfg) {
  detail::check_prepared(clip, cfg);
  auto power = detail::mel_power(clip, cfg);
  for (double& p : power) p = std::log(p + kLogFloor);
  return mfcc_from_log_mel(power, cfg);
}

/// Resample (if needed), pad/trim, then compute `kind`.
inline FeatureMatrix extract(const AudioClip& clip, FeatureKind kind, const FrontendConfig& cfg) {
  validate(clip);
  validate(cfg);
  AudioClip at_rate = clip.sample_rate == cfg.target_rate ? clip : resample(clip, cfg.target_rate);
  AudioClip prepared = pad_or_trim(at_rate, cfg);
  switch (kind) {
    case FeatureKind::log_mel: return melspectrogram_log(prepared, cfg);
    case FeatureKind::log_stft: return stft_log(prepared, cfg);
    case FeatureKind::mfcc_stack: return mfcc_stack(prepared, cfg);
  }
  throw Error(ErrorKind::invalid_request, "unknown feature kind");
}

}  // namespace fcntag::audio
