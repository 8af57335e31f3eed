#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fcntag/audio/frontend.hpp"
#include "fcntag/eval/auc.hpp"

namespace fcntag::eval {

/// Number of band centers in each 1 kHz band [k, k+1) kHz up to fmax.
/// A center sitting exactly on fmax counts toward the last band.
inline std::vector<int> bins_per_khz(audio::FeatureKind kind, const audio::FrontendConfig& cfg) {
  audio::validate(cfg);
  std::vector<double> centers;
  if (kind == audio::FeatureKind::log_mel) {
    centers = audio::mel_filterbank(cfg).center_freqs;
  } else if (kind == audio::FeatureKind::log_stft) {
    for (int k = 0; k < cfg.stft_bins(); ++k) centers.push_back(k * double(cfg.target_rate) / cfg.n_fft);
  } else {
    throw Error(ErrorKind::invalid_request, "bins_per_khz applies to mel or stft");
  }
  const auto n_bands = static_cast<std::size_t>(std::ceil(cfg.fmax / 1000.0));
  std::vector<int> counts(n_bands, 0);
  for (double f : centers) {
    auto b = static_cast<std::size_t>(std::floor(f / 1000.0));
    counts[std::min(b, n_bands - 1)]++;
  }
  return counts;
}

/// CSV `tag,auc,n_pos,n_neg` with a trailing `__macro__` row; undefined AUCs are left empty.
inline std::string report_csv(const AucReport& r, const std::vector<std::string>& tags) {
  std::string out = "tag,auc,n_pos,n_neg\n";
  char buf[64];
  std::size_t pos_total = 0, neg_total = 0;
  for (std::size_t k = 0; k < r.per_tag.size(); ++k) {
    out += k < tags.size() ? tags[k] : "tag" + std::to_string(k);
    out += ",";
    if (r.per_tag[k]) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.per_tag[k]);
      out += buf;
    }
    out += "," + std::to_string(r.n_pos[k]) + "," + std::to_string(r.n_neg[k]) + "\n";
    pos_total += r.n_pos[k];
    neg_total += r.n_neg[k];
  }
  std::snprintf(buf, sizeof buf, "%.6f", r.macro);
  out += std::string("__macro__,") + buf + "," + std::to_string(pos_total) + "," + std::to_string(neg_total) + "\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace fcntag::eval
