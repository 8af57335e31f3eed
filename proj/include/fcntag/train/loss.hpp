#pragma once

#include <algorithm>
#include <cmath>

#include "fcntag/tensor/ops.hpp"

namespace fcntag::train {

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy over all N x K entries, with predictions clamped
/// to [1e-7, 1 - 1e-7]. The gradient is taken at the clamped value and passed
/// straight through the clamp, so saturated outputs still receive a signal.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw Error(ErrorKind::contract,
                "bce_loss: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  const auto p = pred.values();
  const auto y = target.values();
  const double inv_n = 1.0 / static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), kProbClamp, 1.0 - kProbClamp);
    acc += y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return make_result<T>({1}, {static_cast<T>(-acc * inv_n)}, "bce_loss", {pred, target},
                        [pred, target, inv_n](TensorImpl<T>& o) mutable {
                          if (!pred.requires_grad()) return;
                          const auto p = pred.values();
                          const auto y = target.values();
                          auto& g = pred.impl()->grad_buffer();
                          const double up = static_cast<double>(o.grad[0]) * inv_n;
                          for (std::size_t i = 0; i < p.size(); ++i) {
                            const double pc = std::clamp(static_cast<double>(p[i]), kProbClamp, 1.0 - kProbClamp);
                            g[i] += static_cast<T>(up * (-(y[i] / pc) + (1.0 - y[i]) / (1.0 - pc)));
                          }
                        });
}

}  // namespace fcntag::train
