#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "fcntag/audio/frontend.hpp"
#include "fcntag/data/synth.hpp"
#include "fcntag/eval/auc.hpp"

using namespace fcntag;
using namespace fcntag::data;

namespace {

Manifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "/data", "test.csv");
}

const char* kSample =
    "clip_id,path,split,tags\n"
    "a,a.wav,train,rock|guitar\n"
    "b,b.wav,train,rock|pop\n"
    "c,c.wav,train,pop|guitar|rock\n"
    "d,d.wav,valid,jazz|rock\n"
    "e,\"dir,x/e.wav\",test,\n";

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fcntag_data_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

std::size_t find_clip_with(const SynthConfig& cfg, std::array<std::uint8_t, 8> want) {
  for (std::size_t i = 0; i < 5000; ++i)
    if (synth_labels(cfg, i) == want) return i;
  ADD_FAILURE() << "no clip with requested tags";
  return 0;
}

}  // namespace

TEST(Manifest, ParsesQuotedFieldsAndSplits) {
  auto m = parse(kSample);
  ASSERT_EQ(m.entries.size(), 5u);
  EXPECT_EQ(m.entries[4].path, "dir,x/e.wav");
  EXPECT_TRUE(m.entries[4].tags.empty());
  EXPECT_EQ(m.entries[3].split, Split::valid);
  EXPECT_EQ(m.resolve(m.entries[0]), std::filesystem::path("/data/a.wav"));
  EXPECT_EQ(m.indices(Split::train).size(), 3u);
}

TEST(Manifest, CsvRoundTrip) {
  auto m = parse(kSample);
  auto again = parse(manifest_csv(m));
  ASSERT_EQ(again.entries.size(), m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    EXPECT_EQ(again.entries[i].clip_id, m.entries[i].clip_id);
    EXPECT_EQ(again.entries[i].path, m.entries[i].path);
    EXPECT_EQ(again.entries[i].split, m.entries[i].split);
    EXPECT_EQ(again.entries[i].tags, m.entries[i].tags);
  }
}

TEST(Manifest, RejectsMalformedInput) {
  EXPECT_THROW(parse("clip_id,path,split\n"), Error);
  EXPECT_THROW(parse("clip_id,path,split,tags\na,a.wav,train\n"), Error);
  EXPECT_THROW(parse("clip_id,path,split,tags\na,a.wav,holdout,x\n"), Error);
  auto dup = parse("clip_id,path,split,tags\na,a.wav,train,x\na,b.wav,test,y\n");
  EXPECT_THROW(validate(dup, false), Error);
  try {
    validate(parse(kSample), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(Vocabulary, TopKByTrainingCountWithLexicalTies) {
  auto m = parse(kSample);
  auto v = build_vocab(m, 3);
  EXPECT_EQ(v.tags, (std::vector<std::string>{"rock", "guitar", "pop"}));
  EXPECT_EQ(v.counts, (std::vector<std::size_t>{3, 2, 2}));
  EXPECT_EQ(build_vocab(m, 0).size(), 3u);  // jazz appears only in valid
  try {
    build_vocab(m, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_request);
  }
}

TEST(Vocabulary, LabelMatrixRows) {
  auto m = parse(kSample);
  auto v = build_vocab(m, 2);
  auto tr = label_matrix(m, v, Split::train);
  EXPECT_EQ(tr.labels.rows, 3u);
  EXPECT_EQ(tr.labels.cols, 2u);
  EXPECT_EQ(tr.labels.values, (std::vector<std::uint8_t>{1, 1, 1, 0, 1, 1}));
  auto te = label_matrix(m, v, "test");
  EXPECT_EQ(te.labels.rows, 1u);
  EXPECT_EQ(label_matrix(m, v, "test", true).labels.rows, 0u);
  EXPECT_EQ(label_matrix(m, v, "valid").entry_index, (std::vector<std::size_t>{3}));
  try {
    label_matrix(m, v, "holdout");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
  EXPECT_EQ(unique_rows(tr.labels), 2u);
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.tag_probability = 0.6;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.sample_rate = 8000;
  EXPECT_THROW(validate(c), Error);
  c = {};
  EXPECT_NO_THROW(validate(c));
}

TEST(Synth, ClipsAreDeterministic) {
  SynthConfig cfg;
  cfg.seed = 17;
  auto a = synth_clip(cfg, 3), b = synth_clip(cfg, 3);
  EXPECT_EQ(a.tags, b.tags);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
  EXPECT_EQ(a.audio.samples.size(), 88000u);
  EXPECT_EQ(synth_labels(cfg, 3), a.tags);
  cfg.seed = 18;
  EXPECT_NE(synth_clip(cfg, 3).audio.samples, a.audio.samples);
}

TEST(Synth, TagMarginalsNearTarget) {
  SynthConfig cfg;
  cfg.seed = 5;
  std::array<std::size_t, 8> on{};
  for (std::size_t i = 0; i < 1000; ++i) {
    auto t = synth_labels(cfg, i);
    for (std::size_t k = 0; k < 8; ++k) on[k] += t[k];
  }
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(on[k] / 1000.0, 0.35, 0.05) << synth_tags()[k];
}

TEST(Synth, SplitIsExactAndDisjoint) {
  auto s = synth_splits(1000, 3);
  std::size_t n[3] = {0, 0, 0};
  for (auto x : s) ++n[static_cast<int>(x)];
  EXPECT_EQ(n[0], 700u);
  EXPECT_EQ(n[1], 100u);
  EXPECT_EQ(n[2], 200u);
  EXPECT_EQ(synth_splits(1000, 3), s);
  EXPECT_NE(synth_splits(1000, 4), s);
}

TEST(Synth, GeneratedCorpusIsByteIdentical) {
  SynthConfig cfg;
  cfg.n_clips = 6;
  cfg.seed = 2;
  auto d1 = scratch("gen1"), d2 = scratch("gen2");
  auto m = synth_generate(cfg, d1, 2);
  synth_generate(cfg, d2, 1);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(d1 / "manifest.csv"), slurp(d2 / "manifest.csv"));
  for (const auto& e : m.entries) EXPECT_EQ(slurp(d1 / e.path), slurp(d2 / e.path)) << e.clip_id;
  auto loaded = load_manifest(d1 / "manifest.csv");
  EXPECT_EQ(loaded.entries.size(), 6u);
  auto wav = audio::read_wav(d1 / m.entries[0].path);
  EXPECT_EQ(wav.sample_rate, 16000);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Synth, Tone2kPeaksBetweenTwoAndThreeKilohertz) {
  SynthConfig cfg;
  auto idx = find_clip_with(cfg, {0, 1, 0, 0, 0, 0, 0, 0});
  auto clip = synth_clip(cfg, idx);
  auto fc = audio::make_config(12000, 256);
  auto mel = audio::extract(clip.audio, audio::FeatureKind::log_mel, fc);
  auto centers = audio::mel_filterbank(fc).center_freqs;
  std::vector<double> mean(static_cast<std::size_t>(mel.band_count), 0.0);
  for (int b = 0; b < mel.band_count; ++b)
    for (int t = 0; t < mel.frame_count; ++t) mean[static_cast<std::size_t>(b)] += mel.at(b, t);
  auto best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  EXPECT_GE(centers[best], 2000.0);
  EXPECT_LT(centers[best], 3000.0);
}

// A fixed, hand-written detector per tag reading the log-mel image. If it
// separates every tag, the corpus is learnable from the model's input.
TEST(Synth, HandCodedDetectorsSeparateEveryTag) {
  SynthConfig cfg;
  cfg.seed = 11;
  const std::size_t n = 160;
  auto fc = audio::make_config(12000, 256);
  auto centers = audio::mel_filterbank(fc).center_freqs;
  const double frame_rate = double(fc.target_rate) / fc.hop;
  std::vector<std::vector<double>> scores(8, std::vector<double>(n));
  std::vector<std::vector<std::uint8_t>> labels(8, std::vector<std::uint8_t>(n));

  for (std::size_t i = 0; i < n; ++i) {
    auto clip = synth_clip(cfg, i);
    auto mel = audio::extract(clip.audio, audio::FeatureKind::log_mel, fc);
    auto band_mean = [&](double lo, double hi) {
      double acc = 0;
      int cnt = 0;
      for (int b = 0; b < mel.band_count; ++b) {
        double c = centers[static_cast<std::size_t>(b)];
        if (c < lo || c >= hi) continue;
        for (int t = 0; t < mel.frame_count; ++t) acc += mel.at(b, t);
        cnt += mel.frame_count;
      }
      return acc / cnt;
    };
    for (int k = 0; k < 4; ++k) scores[static_cast<std::size_t>(k)][i] = band_mean(1000.0 * (k + 1) + 300, 1000.0 * (k + 1) + 700);
    scores[6][i] = band_mean(5100, 5500);
    scores[7][i] = band_mean(200, 800);

    // Frame energy envelope (bed tone and any tags), relative modulation at 2 Hz and 8 Hz.
    std::vector<double> env(static_cast<std::size_t>(mel.frame_count), 0.0);
    for (int t = 0; t < mel.frame_count; ++t)
      for (int b = 0; b < mel.band_count; ++b) env[static_cast<std::size_t>(t)] += std::exp(mel.at(b, t));
    double m0 = 0;
    for (double e : env) m0 += e;
    m0 /= double(env.size());
    auto tone = [&](double hz) {
      std::complex<double> acc = 0;
      for (std::size_t t = 0; t < env.size(); ++t)
        acc += (env[t] - m0) * std::polar(1.0, -2.0 * std::numbers::pi * hz * double(t) / frame_rate);
      return std::abs(acc) / (m0 * double(env.size()));
    };
    scores[4][i] = tone(2.0);
    scores[5][i] = tone(8.0);
    for (std::size_t k = 0; k < 8; ++k) labels[k][i] = clip.tags[k];
  }
  for (std::size_t k = 0; k < 8; ++k) {
    double auc = eval::roc_auc(scores[k], labels[k]);
    EXPECT_GE(auc, 0.95) << synth_tags()[k];
  }
}
