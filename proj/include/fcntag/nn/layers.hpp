#pragma once

#include <cmath>
#include <cstddef>

#include "fcntag/nn/functional.hpp"

namespace fcntag::nn {

/// Glorot-uniform fill in [-sqrt(6/(fan_in+fan_out)), +...].
template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
}

template <typename T>
struct Conv2DLayer {
  Tensor<T> kernel;  // D_out x D_in x k x k
  Tensor<T> bias;    // D_out

  Conv2DLayer() = default;
  Conv2DLayer(std::size_t in_channels, std::size_t out_channels, std::size_t k, Rng& rng)
      : kernel(Tensor<T>::zeros({out_channels, in_channels, k, k}, true)),
        bias(Tensor<T>::zeros({out_channels}, true)) {
    glorot_uniform(kernel, in_channels * k * k, out_channels * k * k, rng);
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, kernel, bias); }
};

struct MaxPool2DLayer {
  std::size_t pool_h = 1;
  std::size_t pool_w = 1;

  template <typename T>
  Tensor<T> operator()(const Tensor<T>& x) const {
    return maxpool2d(x, pool_h, pool_w);
  }
};

template <typename T>
struct BatchNormLayer {
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormState state;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t channels)
      : gamma(Tensor<T>::full({channels}, T(1), true)), beta(Tensor<T>::zeros({channels}, true)), state(channels) {}

  Tensor<T> operator()(const Tensor<T>& x, Mode mode) { return batchnorm(x, gamma, beta, state, mode); }
};

struct DropoutLayer {
  double rate = 0.5;

  template <typename T>
  Tensor<T> operator()(const Tensor<T>& x, Mode mode, Rng& rng) const {
    return dropout(x, rate, mode, rng);
  }
};

template <typename T>
struct DenseLayer {
  Tensor<T> weights;  // out x in
  Tensor<T> bias;     // out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Rng& rng)
      : weights(Tensor<T>::zeros({out, in}, true)), bias(Tensor<T>::zeros({out}, true)) {
    glorot_uniform(weights, in, out, rng);
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return dense(x, weights, bias); }
};

}  // namespace fcntag::nn
