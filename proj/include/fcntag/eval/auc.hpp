#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcntag/error.hpp"
#include "fcntag/matrix.hpp"

namespace fcntag::eval {

namespace detail {

template <typename S>
std::vector<std::size_t> order_ascending(std::span<const S> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

template <typename S>
void check_scores(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::contract, "roc: " + std::to_string(scores.size()) + " scores but " +
                                         std::to_string(labels.size()) + " labels");
  for (S s : scores)
    if (!std::isfinite(static_cast<double>(s))) throw Error(ErrorKind::numerical, "roc: non-finite score");
}

}  // namespace detail

/// Mann-Whitney AUC with half credit for ties, via midranks in O(N log N).
/// Twice the U statistic is accumulated as an integer, so the result is the
/// exact pair-count ratio. Returns NaN when either class is absent.
template <typename S>
double roc_auc(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  std::uint64_t n_pos = 0;
  for (auto l : labels) n_pos += l != 0;
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();

  auto idx = detail::order_ascending(scores);
  // Sum over positives of 2 * midrank; a tie group at 0-based [i, j) has midrank (i + 1 + j) / 2.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    std::uint64_t pos_in_group = 0;
    for (std::size_t k = i; k < j; ++k) pos_in_group += labels[idx[k]] != 0;
    twice_rank_sum += pos_in_group * (i + 1 + j);
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

template <typename S>
double roc_auc(const std::vector<S>& scores, const std::vector<std::uint8_t>& labels) {
  return roc_auc(std::span<const S>(scores), std::span<const std::uint8_t>(labels));
}

struct RocPoint {
  double fpr = 0, tpr = 0;
};

/// Staircase from (0,0) to (1,1), thresholding from the highest score down;
/// a tie group moves diagonally. Throws when the curve is undefined.
template <typename S>
std::vector<RocPoint> roc_curve(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l != 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::invalid_request, "roc_curve needs both classes");
  auto idx = detail::order_ascending(scores);
  std::reverse(idx.begin(), idx.end());
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) (labels[idx[k]] ? tp : fp)++;
    pts.push_back({double(fp) / double(n_neg), double(tp) / double(n_pos)});
    i = j;
  }
  return pts;
}

inline double trapezoid_area(const std::vector<RocPoint>& pts) {
  double a = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    a += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
  return a;
}

struct AucReport {
  std::vector<std::optional<double>> per_tag;
  std::vector<std::size_t> n_pos, n_neg;
  double macro = 0;
  std::size_t n_skipped = 0;
};

/// Per-tag AUC and the unweighted mean over tags where it is defined.
inline AucReport macro_auc(const ScoreMatrix& preds, const LabelMatrix& labels) {
  if (preds.rows != labels.rows || preds.cols != labels.cols)
    throw Error(ErrorKind::contract, "macro_auc: predictions " + std::to_string(preds.rows) + "x" +
                                         std::to_string(preds.cols) + " vs labels " + std::to_string(labels.rows) +
                                         "x" + std::to_string(labels.cols));
  AucReport r;
  std::vector<float> col(preds.rows);
  std::vector<std::uint8_t> lab(preds.rows);
  double sum = 0;
  std::size_t defined = 0;
  for (std::size_t k = 0; k < preds.cols; ++k) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < preds.rows; ++i) {
      col[i] = preds.at(i, k);
      lab[i] = labels.at(i, k);
      pos += lab[i] != 0;
    }
    r.n_pos.push_back(pos);
    r.n_neg.push_back(preds.rows - pos);
    double a = roc_auc(col, lab);
    if (std::isnan(a)) {
      r.per_tag.emplace_back();
      ++r.n_skipped;
    } else {
      r.per_tag.emplace_back(a);
      sum += a;
      ++defined;
    }
  }
  if (defined == 0) throw Error(ErrorKind::empty_report, "macro_auc: no tag has both positive and negative examples");
  r.macro = sum / double(defined);
  return r;
}

}  // namespace fcntag::eval
