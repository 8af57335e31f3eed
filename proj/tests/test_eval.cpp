#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fcntag/eval/report.hpp"
#include "fcntag/eval/svg.hpp"
#include "oracles.hpp"

using namespace fcntag;
using namespace fcntag::eval;
using fcntag::testing::brute_force_auc;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<int> ilabels;
};

// Scores on a coarse grid so ties are common.
Instance random_instance(std::mt19937_64& rng) {
  Instance in;
  std::size_t n = 2 + rng() % 199;
  int levels = 1 + static_cast<int>(rng() % 20);
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(static_cast<double>(rng() % static_cast<std::uint64_t>(levels)) / levels);
    int l = static_cast<int>(rng() % 2);
    in.labels.push_back(static_cast<std::uint8_t>(l));
    in.ilabels.push_back(l);
  }
  in.labels[0] = 1;
  in.ilabels[0] = 1;
  in.labels[1] = 0;
  in.ilabels[1] = 0;
  return in;
}

}  // namespace

TEST(RocAuc, WorkedExample) {
  std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  std::vector<std::uint8_t> l{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(s, l), 0.75);
}

TEST(RocAuc, PerfectAndConstant) {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<std::uint8_t> l{0, 0, 1, 1};
  EXPECT_EQ(roc_auc(s, l), 1.0);
  std::vector<double> c(4, 0.3);
  EXPECT_EQ(roc_auc(c, l), 0.5);
}

TEST(RocAuc, SingleClassIsNaN) {
  std::vector<double> s{0.1, 0.2};
  EXPECT_TRUE(std::isnan(roc_auc(s, std::vector<std::uint8_t>{1, 1})));
  EXPECT_TRUE(std::isnan(roc_auc(s, std::vector<std::uint8_t>{0, 0})));
}

TEST(RocAuc, EqualsBruteForceExactly) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    auto in = random_instance(rng);
    ASSERT_EQ(roc_auc(in.scores, in.labels), brute_force_auc(in.scores, in.ilabels)) << "trial " << trial;
  }
}

TEST(RocAuc, RankInvarianceAndComplement) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto in = random_instance(rng);
    std::vector<double> warped;
    for (double s : in.scores) warped.push_back(std::exp(3.0 * s) - 7.0);
    EXPECT_EQ(roc_auc(warped, in.labels), roc_auc(in.scores, in.labels));
    std::vector<std::uint8_t> flipped;
    for (auto l : in.labels) flipped.push_back(l ? 0 : 1);
    EXPECT_NEAR(roc_auc(in.scores, flipped), 1.0 - roc_auc(in.scores, in.labels), 1e-15);
  }
}

TEST(RocCurve, Shapes) {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<std::uint8_t> l{0, 0, 1, 1};
  auto perfect = roc_curve(std::span<const double>(s), std::span<const std::uint8_t>(l));
  bool has_corner = false;
  for (auto p : perfect) has_corner |= p.fpr == 0.0 && p.tpr == 1.0;
  EXPECT_TRUE(has_corner);

  std::vector<double> c(4, 0.5);
  auto diag = roc_curve(std::span<const double>(c), std::span<const std::uint8_t>(l));
  ASSERT_EQ(diag.size(), 2u);
  EXPECT_EQ(diag[1].fpr, 1.0);
  EXPECT_EQ(diag[1].tpr, 1.0);

  std::vector<double> ex{0.1, 0.4, 0.35, 0.8};
  EXPECT_NEAR(trapezoid_area(roc_curve(std::span<const double>(ex), std::span<const std::uint8_t>(l))), 0.75, 1e-12);
}

TEST(RocCurve, MonotoneAndAreaMatchesAuc) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng);
    auto pts = roc_curve(std::span<const double>(in.scores), std::span<const std::uint8_t>(in.labels));
    EXPECT_EQ(pts.front().fpr, 0.0);
    EXPECT_EQ(pts.front().tpr, 0.0);
    EXPECT_EQ(pts.back().fpr, 1.0);
    EXPECT_EQ(pts.back().tpr, 1.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
      EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
    }
    EXPECT_NEAR(trapezoid_area(pts), roc_auc(in.scores, in.labels), 1e-12);
  }
}

TEST(MacroAuc, PerfectSkipAndErrors) {
  ScoreMatrix p{4, 2, {0.1f, 0.9f, 0.2f, 0.8f, 0.8f, 0.2f, 0.9f, 0.1f}};
  LabelMatrix l{4, 2, {0, 1, 0, 1, 1, 0, 1, 0}};
  auto r = macro_auc(p, l);
  EXPECT_EQ(r.macro, 1.0);
  EXPECT_EQ(r.n_skipped, 0u);

  LabelMatrix one_empty{4, 2, {0, 1, 0, 1, 0, 0, 0, 1}};
  auto r2 = macro_auc(p, one_empty);
  EXPECT_EQ(r2.n_skipped, 1u);
  EXPECT_FALSE(r2.per_tag[0].has_value() && r2.per_tag[1].has_value());

  LabelMatrix none{4, 2, std::vector<std::uint8_t>(8, 0)};
  try {
    macro_auc(p, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_report);
  }
  EXPECT_THROW(macro_auc(p, LabelMatrix{3, 2, std::vector<std::uint8_t>(6, 0)}), Error);
}

TEST(MacroAuc, RandomScoresNearHalf) {
  std::mt19937_64 rng(11);
  const std::size_t n = 10000, k = 50;
  ScoreMatrix p{n, k, std::vector<float>(n * k)};
  LabelMatrix l{n, k, std::vector<std::uint8_t>(n * k)};
  for (auto& v : p.values) v = static_cast<float>((rng() >> 11) * 0x1.0p-53);
  for (auto& v : l.values) v = static_cast<std::uint8_t>(rng() & 1);
  auto r = macro_auc(p, l);
  EXPECT_NEAR(r.macro, 0.5, 0.02);
  for (const auto& a : r.per_tag) {
    ASSERT_TRUE(a.has_value());
    EXPECT_GE(*a, 0.0);
    EXPECT_LE(*a, 1.0);
  }
}

TEST(BinsPerKhz, MelConcentratesLowStftUniform) {
  audio::FrontendConfig cfg;
  auto mel = bins_per_khz(audio::FeatureKind::log_mel, cfg);
  auto stft = bins_per_khz(audio::FeatureKind::log_stft, cfg);
  ASSERT_EQ(mel.size(), 6u);
  ASSERT_EQ(stft.size(), 6u);
  int mel_sum = 0, stft_sum = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    mel_sum += mel[i];
    stft_sum += stft[i];
    if (i) EXPECT_LT(mel[i], mel[i - 1]);
    EXPECT_GE(stft[i], 21);
    EXPECT_LE(stft[i], 22);
  }
  EXPECT_EQ(mel_sum, 96);
  EXPECT_EQ(stft_sum, 129);
  EXPECT_GT(mel[0], mel[5]);
}

TEST(Report, CsvLayout) {
  AucReport r;
  r.per_tag = {0.75, std::nullopt};
  r.n_pos = {2, 0};
  r.n_neg = {2, 4};
  r.macro = 0.75;
  r.n_skipped = 1;
  auto csv = report_csv(r, {"rock", "pop"});
  EXPECT_EQ(csv, "tag,auc,n_pos,n_neg\nrock,0.750000,2,2\npop,,0,4\n__macro__,0.750000,2,6\n");
}

TEST(Svg, ChartsAreWellFormed) {
  auto s = svg::line_chart({"curves", "epoch", "auc", 1, 3, 0.5, 1}, {{"a", {{1, 0.6}, {2, 0.7}, {3, 0.9}}}});
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("<polyline"), std::string::npos);
  EXPECT_NE(s.rfind("</svg>"), std::string::npos);
  auto b = svg::bar_chart({"bins", "kHz", "count"}, {"0-1", "1-2"}, {{"mel", {38, 19}}, {"stft", {22, 21}}});
  EXPECT_EQ(std::count(b.begin(), b.end(), '\n') > 4, true);
  EXPECT_NE(b.find("<rect x="), std::string::npos);
}
