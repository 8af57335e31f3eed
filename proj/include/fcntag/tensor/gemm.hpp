#pragma once

#include <Eigen/Core>

namespace fcntag::detail {

/// C(m x n) = op(A) * op(B), or C += ... when `accumulate`. Row-major storage;
/// op(A) is m x k and op(B) is k x n.
template <typename T>
void gemm(bool trans_a, bool trans_b, Eigen::Index m, Eigen::Index n, Eigen::Index k, const T* a, const T* b, T* c,
          bool accumulate) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> a_map(a, trans_a ? k : m, trans_a ? m : k);
  Eigen::Map<const Mat> b_map(b, trans_b ? n : k, trans_b ? k : n);
  Eigen::Map<Mat> c_map(c, m, n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate)
      c_map.noalias() += lhs * rhs;
    else
      c_map.noalias() = lhs * rhs;
  };
  if (trans_a && trans_b)
    run(a_map.transpose(), b_map.transpose());
  else if (trans_a)
    run(a_map.transpose(), b_map);
  else if (trans_b)
    run(a_map, b_map.transpose());
  else
    run(a_map, b_map);
}

}  // namespace fcntag::detail
