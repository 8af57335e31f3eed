#pragma once

// Seeded synthetic tagging corpus. Each of the 8 tags has a fixed audio
// correlate, so a model that reads the spectrogram can learn every tag.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fcntag/audio/wav.hpp"
#include "fcntag/data/manifest.hpp"
#include "fcntag/parallel.hpp"
#include "fcntag/rng.hpp"

namespace fcntag::data {

inline const std::array<std::string, 8>& synth_tags() {
  static const std::array<std::string, 8> tags{"tone_1k", "tone_2k", "tone_3k", "tone_4k",
                                               "am_slow", "am_fast", "noise",   "harmonic"};
  return tags;
}

struct SynthConfig {
  std::size_t n_clips = 1000;
  double duration_s = 5.5;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  double tag_probability = 0.35;

  // Audio correlates.
  double tone_amplitude = 0.12;
  double bed_hz = 950.0, bed_amplitude = 0.05;
  double am_slow_hz = 2.0, am_fast_hz = 8.0, am_depth = 0.9;
  double noise_lo_hz = 5000.0, noise_hi_hz = 5600.0, noise_rms = 0.04;
  double harmonic_f0_lo = 110.0, harmonic_f0_hi = 150.0;
  int harmonic_partials = 5;  // f0 plus four overtones
};

inline void validate(const SynthConfig& c) {
  auto bad = [](const std::string& why) { return Error(ErrorKind::invalid_config, "synth: " + why); };
  if (c.n_clips < 1) throw bad("n_clips must be at least 1");
  if (!(c.duration_s > 0.0)) throw bad("duration must be positive");
  if (c.sample_rate < 2 * static_cast<int>(c.noise_hi_hz) + 100) throw bad("sample_rate too low for the noise band");
  if (!(c.tag_probability >= 0.2 && c.tag_probability <= 0.5)) throw bad("tag probability must be in [0.2, 0.5]");
}

struct SynthClip {
  audio::AudioClip audio;
  std::array<std::uint8_t, 8> tags{};
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

/// Standard normal pairs via Box-Muller; platform-independent unlike std::normal_distribution.
inline void gaussian_fill(std::mt19937_64& rng, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    double u1 = uniform(rng, 0.0, 1.0);
    double u2 = uniform(rng, 0.0, 1.0);
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < out.size()) out[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
}

/// Blackman-windowed sinc band-pass.
inline std::vector<double> bandpass_taps(double lo_hz, double hi_hz, int rate, int n_taps = 255) {
  std::vector<double> h(static_cast<std::size_t>(n_taps));
  const double m = (n_taps - 1) / 2.0;
  const double f1 = lo_hz / rate, f2 = hi_hz / rate;
  for (int i = 0; i < n_taps; ++i) {
    double x = i - m;
    auto lp = [x](double f) { return x == 0.0 ? 2.0 * f : std::sin(2.0 * std::numbers::pi * f * x) / (std::numbers::pi * x); };
    double w = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n_taps - 1)) +
               0.08 * std::cos(4.0 * std::numbers::pi * i / (n_taps - 1));
    h[static_cast<std::size_t>(i)] = w * (lp(f2) - lp(f1));
  }
  return h;
}

}  // namespace detail

namespace detail {

inline std::mt19937_64 clip_rng(const SynthConfig& cfg, std::size_t index) {
  return std::mt19937_64(derive_seed(derive_seed(cfg.seed, Stream::synth), index));
}

inline std::array<std::uint8_t, 8> draw_tags(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::array<std::uint8_t, 8> tags{};
  for (auto& t : tags) t = uniform(rng, 0.0, 1.0) < cfg.tag_probability ? 1 : 0;
  return tags;
}

}  // namespace detail

/// Tags of clip `index` without rendering its audio.
inline std::array<std::uint8_t, 8> synth_labels(const SynthConfig& cfg, std::size_t index) {
  auto rng = detail::clip_rng(cfg, index);
  return detail::draw_tags(cfg, rng);
}

/// Deterministic function of (seed, index): tag draws first, then audio parameters.
inline SynthClip synth_clip(const SynthConfig& cfg, std::size_t index) {
  auto rng = detail::clip_rng(cfg, index);
  SynthClip clip;
  clip.tags = detail::draw_tags(cfg, rng);

  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate));
  const double fs = cfg.sample_rate;
  std::vector<double> x(n, 0.0);
  auto add_sine = [&](double hz, double amp) {
    const double phase = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double w = 2.0 * std::numbers::pi * hz / fs;
    for (std::size_t i = 0; i < n; ++i) x[i] += amp * std::sin(w * static_cast<double>(i) + phase);
  };

  add_sine(cfg.bed_hz, cfg.bed_amplitude);
  for (int k = 0; k < 4; ++k) {
    const double lo = 1000.0 * (k + 1) + 250.0;
    const double hz = detail::uniform(rng, lo, lo + 500.0);
    if (clip.tags[static_cast<std::size_t>(k)]) add_sine(hz, cfg.tone_amplitude);
  }
  {
    const double f0 = detail::uniform(rng, cfg.harmonic_f0_lo, cfg.harmonic_f0_hi);
    if (clip.tags[7])
      for (int h = 1; h <= cfg.harmonic_partials; ++h) add_sine(f0 * h, 0.1 / h);
  }
  if (clip.tags[6]) {
    auto taps = detail::bandpass_taps(cfg.noise_lo_hz, cfg.noise_hi_hz, cfg.sample_rate);
    std::vector<double> white(n + taps.size());
    detail::gaussian_fill(rng, white);
    std::vector<double> band(n, 0.0);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < taps.size(); ++j) acc += taps[j] * white[i + j];
      band[i] = acc;
      energy += acc * acc;
    }
    const double scale = cfg.noise_rms / std::sqrt(energy / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) x[i] += scale * band[i];
  }
  for (int a = 0; a < 2; ++a) {
    const double rate = a == 0 ? cfg.am_slow_hz : cfg.am_fast_hz;
    const double phase = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
    if (!clip.tags[4 + static_cast<std::size_t>(a)]) continue;
    const double w = 2.0 * std::numbers::pi * rate / fs;
    for (std::size_t i = 0; i < n; ++i)
      x[i] *= 1.0 - cfg.am_depth * 0.5 * (1.0 - std::cos(w * static_cast<double>(i) + phase));
  }
  clip.audio = audio::AudioClip{std::move(x), cfg.sample_rate};
  return clip;
}

/// Split of clip `i` under an exact 70/10/20 partition drawn from a seeded permutation.
inline std::vector<Split> synth_splits(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(derive_seed(seed, Stream::split));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng() % i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * double(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(0.1 * double(n)));
  std::vector<Split> splits(n, Split::test);
  for (std::size_t r = 0; r < n; ++r)
    splits[perm[r]] = r < n_train ? Split::train : r < n_train + n_valid ? Split::valid : Split::test;
  return splits;
}

inline std::string synth_clip_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05zu", index);
  return buf;
}

/// Writes `audio/<clip_id>.wav` (16-bit PCM) for every clip and `manifest.csv`
/// under `out_dir`, and returns the manifest.
inline Manifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                               std::size_t workers = worker_count()) {
  validate(cfg);
  std::filesystem::create_directories(out_dir / "audio");
  auto splits = synth_splits(cfg.n_clips, cfg.seed);
  Manifest m;
  m.base_dir = out_dir;
  m.entries.resize(cfg.n_clips);
  parallel_for(cfg.n_clips, workers, [&](std::size_t i) {
    auto clip = synth_clip(cfg, i);
    auto& e = m.entries[i];
    e.clip_id = synth_clip_id(i);
    e.path = "audio/" + e.clip_id + ".wav";
    e.split = splits[i];
    for (std::size_t t = 0; t < clip.tags.size(); ++t)
      if (clip.tags[t]) e.tags.push_back(synth_tags()[t]);
    audio::write_wav_pcm16(out_dir / e.path, clip.audio);
  });
  save_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace fcntag::data
