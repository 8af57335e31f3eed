#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fcntag/audio/feature_io.hpp"
#include "fcntag/audio/frontend.hpp"
#include "fcntag/audio/wav.hpp"
#include "oracles.hpp"

using namespace fcntag;
using namespace fcntag::audio;
using fcntag::testing::naive_dct_ortho;
using fcntag::testing::naive_dft_magnitude;
using fcntag::testing::random_values;

namespace {

AudioClip sine(double hz, int rate, std::size_t n, double amp = 1.0) {
  AudioClip c{std::vector<double>(n), rate};
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / rate);
  return c;
}

double rms(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / double(x.size()));
}

// Short config used where the full 1366 frames would only slow the test down.
FrontendConfig short_config(int frames = 40) { return make_config(12000, frames); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an fcntag::Error";
  return ErrorKind::io;
}

}  // namespace

TEST(Resample, LengthArithmetic) {
  PolyphaseResampler r(16000, 12000);
  EXPECT_EQ(r.output_length(465600), 349200u);
  auto out = resample(AudioClip{std::vector<double>(465600, 0.0), 16000}, 12000);
  EXPECT_EQ(out.samples.size(), 349200u);
  EXPECT_EQ(out.sample_rate, 12000);
  EXPECT_EQ(resample(AudioClip{std::vector<double>(1001, 0.0), 22050}, 12000).samples.size(),
            static_cast<std::size_t>(std::llround(1001.0 * 12000 / 22050)));
}

TEST(Resample, Errors) {
  EXPECT_EQ(kind_of([] { resample(AudioClip{{}, 16000}, 12000); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { resample(AudioClip{std::vector<double>(10, 0.0), 8000}, 12000); }),
            ErrorKind::unsupported_direction);
}

TEST(Resample, PreservesInBandTone) {
  auto out = resample(sine(1000.0, 16000, 16000), 12000);
  std::vector<double> frame(out.samples.begin() + 6000, out.samples.begin() + 6256);
  auto mag = naive_dft_magnitude(frame);
  auto peak = std::max_element(mag.begin(), mag.end()) - mag.begin();
  // 1000 Hz / 46.875 Hz per bin = 21.3
  EXPECT_EQ(peak, 21);
  // amplitude preserved in the interior
  std::span<const double> mid(out.samples.data() + 1000, 10000);
  EXPECT_NEAR(rms(mid), 1.0 / std::sqrt(2.0), 0.01);
}

TEST(Resample, SuppressesAliasingTones) {
  for (double hz : {6500.0, 7000.0, 7900.0}) {
    auto in = sine(hz, 16000, 32000);
    auto out = resample(in, 12000);
    // Skip the filter's start-up and tail transients.
    std::span<const double> mid(out.samples.data() + 2000, out.samples.size() - 4000);
    double ratio = rms(mid) / rms(in.samples);
    EXPECT_LE(ratio, 1e-3) << hz << " Hz";
  }
}

TEST(PadOrTrim, Contract) {
  auto cfg = FrontendConfig{};
  ASSERT_EQ(cfg.clip_length(), 349696u);
  AudioClip short_clip{std::vector<double>(349200, 0.5), 12000};
  auto p = pad_or_trim(short_clip, cfg);
  ASSERT_EQ(p.samples.size(), 349696u);
  EXPECT_EQ(p.samples[349199], 0.5);
  for (std::size_t i = 349200; i < 349696; ++i) ASSERT_EQ(p.samples[i], 0.0);

  auto long_vals = random_values(400000, 1, -1, 1);
  auto t = pad_or_trim(AudioClip{long_vals, 12000}, cfg);
  ASSERT_EQ(t.samples.size(), 349696u);
  EXPECT_TRUE(std::equal(t.samples.begin(), t.samples.end(), long_vals.begin()));

  AudioClip exact{random_values(349696, 2, -1, 1), 12000};
  EXPECT_EQ(pad_or_trim(exact, cfg).samples, exact.samples);
  EXPECT_EQ(kind_of([&] { pad_or_trim(AudioClip{{1.0}, 16000}, cfg); }), ErrorKind::contract);
}

TEST(Stft, DefaultShapeAndSilence) {
  FrontendConfig cfg;
  AudioClip silent{std::vector<double>(cfg.clip_length(), 0.0), 12000};
  auto fm = stft_log(silent, cfg);
  EXPECT_EQ(fm.band_count, 129);
  EXPECT_EQ(fm.frame_count, 1366);
  EXPECT_EQ(fm.kind, FeatureKind::log_stft);
  const float floor = static_cast<float>(std::log(kLogFloor));
  for (float v : fm.data) ASSERT_EQ(v, floor);
}

TEST(Stft, SinePeaksAtBin32) {
  auto cfg = short_config();
  auto clip = sine(1500.0, 12000, cfg.clip_length());
  auto fm = stft_log(clip, cfg);
  for (int t = 1; t + 1 < cfg.n_frames; ++t) {
    int best = 0;
    for (int b = 1; b < fm.band_count; ++b)
      if (fm.at(b, t) > fm.at(best, t)) best = b;
    ASSERT_EQ(best, 32) << "frame " << t;
  }
}

TEST(Stft, MatchesIndependentDft) {
  auto cfg = short_config(8);
  AudioClip clip{random_values(cfg.clip_length(), 3, -1, 1), 12000};
  auto fm = stft_log(clip, cfg);
  for (int t : {0, 5}) {
    std::vector<double> frame(256);
    for (int i = 0; i < 256; ++i) {
      double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / 256.0);
      frame[i] = w * clip.samples[static_cast<std::size_t>(t * 256 + i)];
    }
    auto mag = naive_dft_magnitude(frame);
    for (int b = 0; b < 129; ++b) EXPECT_NEAR(fm.at(b, t), std::log(mag[b] + kLogFloor), 1e-4);
  }
}

TEST(Stft, WrongRateIsContractError) {
  auto cfg = short_config();
  EXPECT_EQ(kind_of([&] { stft_log(AudioClip{std::vector<double>(cfg.clip_length()), 16000}, cfg); }),
            ErrorKind::contract);
  EXPECT_EQ(kind_of([&] { melspectrogram_log(AudioClip{std::vector<double>(100), 12000}, cfg); }),
            ErrorKind::contract);
}

TEST(MelFilterbank, ShapeCentersAndRows) {
  auto fb = mel_filterbank(FrontendConfig{});
  EXPECT_EQ(fb.n_mels, 96);
  EXPECT_EQ(fb.n_bins, 129);
  EXPECT_EQ(fb.weights.size(), 96u * 129u);
  for (int m = 0; m < 96; ++m) {
    double row = 0, peak = 0;
    for (int k = 0; k < 129; ++k) {
      ASSERT_GE(fb.weight(m, k), 0.0);
      row += fb.weight(m, k);
      peak = std::max(peak, fb.weight(m, k));
    }
    EXPECT_GT(peak, 0.0);
    EXPECT_NEAR(row, 1.0, 1e-12);
    EXPECT_GT(fb.center_freqs[m], 0.0);
    EXPECT_LT(fb.center_freqs[m], 6000.0);
    if (m) {
      EXPECT_GT(fb.center_freqs[m], fb.center_freqs[m - 1]);
    }
  }
}

TEST(MelFilterbank, LowFrequencyAllocation) {
  auto fb = mel_filterbank(FrontendConfig{});
  int below = 0;
  for (double c : fb.center_freqs) below += c < 1000.0;
  // Independent estimate from the mel mapping: 96 * m(1000) / m(6000).
  const double expected = 96.0 * 2595.0 * std::log10(1.0 + 1000.0 / 700.0) / (2595.0 * std::log10(1.0 + 6000.0 / 700.0));
  EXPECT_NEAR(below, expected, 2.0);
  EXPECT_GT(below, 96 / 6);
}

TEST(MelFilterbank, CoverageBetweenExtremeCenters) {
  auto fb = mel_filterbank(FrontendConfig{});
  const double bin_hz = 12000.0 / 256.0;
  for (int k = 0; k < 129; ++k) {
    double f = k * bin_hz;
    if (f <= fb.center_freqs.front() || f >= fb.center_freqs.back()) continue;
    double s = 0;
    for (int m = 0; m < 96; ++m) s += fb.weight(m, k);
    EXPECT_GT(s, 0.0) << "bin " << k;
  }
}

TEST(MelFilterbank, TooManyMelsIsInvalidConfig) {
  FrontendConfig cfg;
  cfg.n_mels = 200;
  EXPECT_EQ(kind_of([&] { mel_filterbank(cfg); }), ErrorKind::invalid_config);
}

TEST(Melspectrogram, DefaultShapeAndSilence) {
  FrontendConfig cfg;
  auto fm = melspectrogram_log(AudioClip{std::vector<double>(cfg.clip_length(), 0.0), 12000}, cfg);
  EXPECT_EQ(fm.band_count, 96);
  EXPECT_EQ(fm.frame_count, 1366);
  const float floor = static_cast<float>(std::log(kLogFloor));
  for (float v : fm.data) ASSERT_EQ(v, floor);
}

TEST(Melspectrogram, EqualsFilterbankTimesPower) {
  auto cfg = short_config(4);
  AudioClip clip{random_values(cfg.clip_length(), 4, -1, 1), 12000};
  auto fm = melspectrogram_log(clip, cfg);
  auto fb = mel_filterbank(cfg);
  std::vector<double> frame(256);
  for (int i = 0; i < 256; ++i)
    frame[i] = (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / 256.0)) * clip.samples[static_cast<std::size_t>(512 + i)];
  auto mag = naive_dft_magnitude(frame);
  for (int m = 0; m < 96; ++m) {
    double p = 0;
    for (int k = 0; k < 129; ++k) p += fb.weight(m, k) * mag[k] * mag[k];
    EXPECT_NEAR(fm.at(m, 2), std::log(p + kLogFloor), 1e-4);
  }
}

TEST(Melspectrogram, ScalingByTenAddsLogHundred) {
  auto cfg = short_config();
  AudioClip a{random_values(cfg.clip_length(), 5, -0.05, 0.05), 12000};
  AudioClip b = a;
  for (double& v : b.samples) v *= 10.0;
  auto fa = melspectrogram_log(a, cfg);
  auto fb = melspectrogram_log(b, cfg);
  for (std::size_t i = 0; i < fa.data.size(); ++i) {
    if (std::exp(double(fa.data[i])) < 1e4 * kLogFloor) continue;
    EXPECT_NEAR(fb.data[i] - fa.data[i], std::log(100.0), 1e-4);
  }
}

TEST(Melspectrogram, EnergyOrderingProperty) {
  auto cfg = short_config(16);
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    AudioClip a{random_values(cfg.clip_length(), seed, -0.5, 0.5), 12000};
    for (double c : {1.01, 1.5, 7.0}) {
      AudioClip b = a;
      for (double& v : b.samples) v *= c;
      auto fa = melspectrogram_log(a, cfg);
      auto fb = melspectrogram_log(b, cfg);
      for (std::size_t i = 0; i < fa.data.size(); ++i) ASSERT_GE(fb.data[i], fa.data[i]);
    }
  }
}

TEST(Mfcc, DefaultShape) {
  FrontendConfig cfg;
  AudioClip clip{random_values(cfg.clip_length(), 6, -0.2, 0.2), 12000};
  auto fm = mfcc_stack(clip, cfg);
  EXPECT_EQ(fm.band_count, 90);
  EXPECT_EQ(fm.frame_count, 1366);
  for (float v : fm.data) ASSERT_TRUE(std::isfinite(v));
}

TEST(Mfcc, CoefficientsMatchNaiveDct) {
  auto cfg = short_config(3);
  std::vector<double> log_mel(96 * 3);
  auto col = random_values(96, 7, -5, 2);
  for (int m = 0; m < 96; ++m)
    for (int t = 0; t < 3; ++t) log_mel[m * 3 + t] = col[m];
  auto fm = mfcc_from_log_mel(log_mel, cfg);
  auto ref = naive_dct_ortho(col, 30);
  for (int k = 0; k < 30; ++k) EXPECT_NEAR(fm.at(k, 1), ref[k], 1e-5);
  // constant in time: both delta blocks vanish
  for (int r = 30; r < 90; ++r)
    for (int t = 0; t < 3; ++t) EXPECT_EQ(fm.at(r, t), 0.0f);
}

TEST(Mfcc, DctIsOrthonormal) {
  auto x = random_values(96, 8, -1, 1);
  auto y = dct_ii(x, 96);
  double ex = 0, ey = 0;
  for (double v : x) ex += v * v;
  for (double v : y) ey += v * v;
  EXPECT_NEAR(ex, ey, 1e-10);
}

TEST(Deltas, LinearRampHasUnitSlopeInInterior) {
  std::vector<double> ramp(20);
  for (int t = 0; t < 20; ++t) ramp[t] = 3.0 * t;
  auto d = deltas(ramp, 1, 20);
  for (int t = 4; t < 16; ++t) EXPECT_NEAR(d[t], 3.0, 1e-12);
  // edges replicate the boundary frame, so slope estimates shrink there
  EXPECT_LT(d[0], 3.0);
  EXPECT_GT(d[0], 0.0);
}

TEST(Deltas, Linearity) {
  auto a = random_values(5 * 30, 9, -1, 1);
  auto b = random_values(5 * 30, 10, -1, 1);
  std::vector<double> s(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
  auto da = deltas(a, 5, 30), db = deltas(b, 5, 30), ds = deltas(s, 5, 30);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(ds[i], da[i] + db[i], 1e-12);
}

TEST(Frontend, ShapeLawAcrossConfigs) {
  for (int n_fft : {128, 256, 512})
    for (int frames : {5, 17}) {
      auto cfg = make_config(12000, frames);
      cfg.n_fft = n_fft;
      cfg.hop = n_fft / 2;
      cfg.n_mels = std::min(40, n_fft / 2 + 1);
      cfg.n_mfcc = 13;
      AudioClip clip{random_values(1000, 11, -1, 1), 12000};
      for (auto kind : {FeatureKind::log_mel, FeatureKind::log_stft, FeatureKind::mfcc_stack}) {
        auto fm = extract(clip, kind, cfg);
        EXPECT_EQ(fm.band_count, band_count_for(kind, cfg));
        EXPECT_EQ(fm.frame_count, frames);
        EXPECT_EQ(fm.data.size(), std::size_t(fm.band_count) * frames);
      }
    }
}

TEST(Frontend, DeterministicAndResamplesOnDemand) {
  auto cfg = short_config(30);
  auto clip = sine(440.0, 16000, 12000, 0.3);
  auto a = extract(clip, FeatureKind::mfcc_stack, cfg);
  auto b = extract(clip, FeatureKind::mfcc_stack, cfg);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.config_hash, config_hash(cfg));
}

TEST(Frontend, ConfigValidation) {
  FrontendConfig cfg;
  cfg.hop = 300;
  EXPECT_EQ(kind_of([&] { validate(cfg); }), ErrorKind::invalid_config);
  cfg = FrontendConfig{};
  cfg.fmax = 7000;
  EXPECT_EQ(kind_of([&] { validate(cfg); }), ErrorKind::invalid_config);
  EXPECT_NE(config_hash(FrontendConfig{}), config_hash(make_config(12000, 100)));
}

TEST(FeatureIo, RoundTripIsExact) {
  auto cfg = short_config(12);
  AudioClip clip{random_values(cfg.clip_length(), 12, -1, 1), 12000};
  auto fm = melspectrogram_log(clip, cfg);
  auto bytes = encode_features(fm);
  ASSERT_EQ(bytes.size(), kFeatureHeaderSize + fm.data.size() * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FCNF");
  EXPECT_TRUE(decode_features(bytes) == fm);

  auto dir = std::filesystem::temp_directory_path() / "fcntag_feature_io_test";
  std::filesystem::create_directories(dir);
  write_features(dir / "a.fcnf", fm);
  EXPECT_TRUE(read_features(dir / "a.fcnf") == fm);
  FeatureHeader h;
  ASSERT_TRUE(peek_feature_header(dir / "a.fcnf", h));
  EXPECT_EQ(h.config_hash, fm.config_hash);
  std::filesystem::remove_all(dir);
}

TEST(FeatureIo, RejectsCorruptInput) {
  auto cfg = short_config(2);
  auto fm = make_feature(FeatureKind::log_mel, 96, cfg);
  auto bytes = encode_features(fm);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_features(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_features(bad_magic), Error);
  fm.data[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(decode_features(encode_features(fm)), Error);
}

TEST(Wav, Pcm16RoundTripWithinQuantization) {
  auto clip = sine(300.0, 16000, 1600, 0.5);
  auto back = parse_wav(encode_wav_pcm16(clip));
  ASSERT_EQ(back.sample_rate, 16000);
  ASSERT_EQ(back.samples.size(), clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i) EXPECT_NEAR(back.samples[i], clip.samples[i], 1.0 / 32767);
}

TEST(Wav, StereoFloatAveragedToMono) {
  // Hand-built IEEE float stereo file: left 0.5, right -0.25 in both frames.
  std::vector<unsigned char> b;
  auto put = [&](const void* p, std::size_t n) {
    auto* c = static_cast<const unsigned char*>(p);
    b.insert(b.end(), c, c + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  const float frames[4] = {0.5f, -0.25f, 0.5f, -0.25f};
  put("RIFF", 4);
  u32(36 + 16);
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(3);
  u16(2);
  u32(8000);
  u32(8000 * 8);
  u16(8);
  u16(32);
  put("data", 4);
  u32(16);
  put(frames, 16);
  auto clip = parse_wav(b);
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_DOUBLE_EQ(clip.samples[0], 0.125);
  EXPECT_EQ(clip.sample_rate, 8000);
  b.resize(20);
  EXPECT_EQ(kind_of([&] { parse_wav(b); }), ErrorKind::invalid_input);
}
