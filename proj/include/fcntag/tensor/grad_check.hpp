#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fcntag/tensor/tensor.hpp"

namespace fcntag {

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Returns max over coordinates of
/// |analytic - numeric| / max(1, |analytic| + |numeric|).
///
/// `f` is re-invoked with the inputs' values perturbed in place, so it must
/// read them fresh on every call.
template <typename T>
double grad_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> inputs, double step = 1e-5) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  Tensor<T> y = f();
  if (y.numel() != 1) throw Error(ErrorKind::contract, "grad_check needs a scalar-valued function");
  backward(y);

  double worst = 0.0;
  for (auto& x : inputs) {
    std::vector<T> analytic(x.numel(), T(0));
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto vals = x.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T saved = vals[i];
      vals[i] = static_cast<T>(saved + step);
      const double up = f().item();
      vals[i] = static_cast<T>(saved - step);
      const double down = f().item();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, double step = 1e-5) {
  return grad_check<T>([&] { return f(x); }, std::vector<Tensor<T>>{x}, step);
}

}  // namespace fcntag
