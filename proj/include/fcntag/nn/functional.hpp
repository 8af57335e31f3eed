#pragma once

// Differentiable convolution, pooling, normalization and dropout on
// N x C x H x W tensors.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "fcntag/tensor/gemm.hpp"
#include "fcntag/tensor/ops.hpp"
#include "fcntag/tensor/tensor.hpp"

namespace fcntag::nn {

enum class Mode { train, infer };

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace detail {

template <typename T>
void require_nchw(const char* op, const Tensor<T>& x) {
  if (x.rank() != 4) throw Error(ErrorKind::shape, std::string(op) + ": expected N x C x H x W, got " + shape_str(x.shape()));
}

// Gathers kh x kw zero-padded patches of one image (C x H x W) into a
// (C*kh*kw) x (H*W) matrix.
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, T* col) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = img + c * h * w;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        T* row = col + ((c * kh + i) * kw + j) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pw;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* dst = row + y * W;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H || x_lo >= x_hi) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          std::fill(dst, dst + x_lo, T(0));
          std::memcpy(dst + x_lo, plane + sy * W + x_lo + dx, static_cast<std::size_t>(x_hi - x_lo) * sizeof(T));
          std::fill(dst + x_hi, dst + W, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds a column matrix back into an image.
template <typename T>
void col2im_add(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                T* img) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = img + c * h * w;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const T* row = col + ((c * kh + i) * kw + j) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pw;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* src = row + y * W;
          T* dst = plane + sy * W + dx;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

}  // namespace detail

/// Same-padded stride-1 convolution. weight: D_out x D_in x kh x kw (odd kh, kw); bias: D_out.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::require_nchw("conv2d", input);
  if (weight.rank() != 4) throw Error(ErrorKind::shape, "conv2d: kernel must be 4-D, got " + shape_str(weight.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t d = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c)
    throw Error(ErrorKind::shape, "conv2d: input has " + std::to_string(c) + " channels but kernel " +
                                      shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  if (kh % 2 == 0 || kw % 2 == 0) throw Error(ErrorKind::shape, "conv2d: same padding needs odd kernel sizes");
  if (bias.numel() != d)
    throw Error(ErrorKind::shape, "conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(d) +
                                      " output channels");

  const std::size_t hw = h * w;
  const std::size_t ckk = c * kh * kw;
  const bool pointwise = kh == 1 && kw == 1;
  std::vector<T> out(n * d * hw);
  std::vector<T> col(pointwise ? 0 : ckk * hw);
  auto in = input.values();
  auto wt = weight.values();
  auto bs = bias.values();
  using Ix = Eigen::Index;
  for (std::size_t b = 0; b < n; ++b) {
    const T* img = in.data() + b * c * hw;
    if (!pointwise) detail::im2col(img, c, h, w, kh, kw, col.data());
    T* dst = out.data() + b * d * hw;
    for (std::size_t o = 0; o < d; ++o) std::fill(dst + o * hw, dst + (o + 1) * hw, bs[o]);
    fcntag::detail::gemm<T>(false, false, Ix(d), Ix(hw), Ix(ckk), wt.data(), pointwise ? img : col.data(), dst, true);
  }

  return make_result<T>(
      {n, d, h, w}, std::move(out), "conv2d", {input, weight, bias},
      [input, weight, bias, n, c, h, w, d, kh, kw, hw, ckk, pointwise](TensorImpl<T>& o) mutable {
        const T* g = o.grad.data();
        auto in = input.values();
        std::vector<T> col(pointwise ? 0 : ckk * hw);
        std::vector<T> dcol(pointwise ? 0 : ckk * hw);
        T* gw = weight.requires_grad() ? weight.impl()->grad_buffer().data() : nullptr;
        T* gb = bias.requires_grad() ? bias.impl()->grad_buffer().data() : nullptr;
        T* gi = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          const T* gout = g + b * d * hw;
          const T* img = in.data() + b * c * hw;
          if (gb)
            for (std::size_t oc = 0; oc < d; ++oc) {
              double acc = 0.0;
              for (std::size_t p = 0; p < hw; ++p) acc += gout[p + oc * hw];
              gb[oc] += static_cast<T>(acc);
            }
          if (gw) {
            if (!pointwise) detail::im2col(img, c, h, w, kh, kw, col.data());
            fcntag::detail::gemm<T>(false, true, Ix(d), Ix(ckk), Ix(hw), gout, pointwise ? img : col.data(), gw, true);
          }
          if (gi) {
            T* gimg = gi + b * c * hw;
            if (pointwise) {
              fcntag::detail::gemm<T>(true, false, Ix(ckk), Ix(hw), Ix(d), weight.values().data(), gout, gimg, true);
            } else {
              fcntag::detail::gemm<T>(true, false, Ix(ckk), Ix(hw), Ix(d), weight.values().data(), gout, dcol.data(), false);
              detail::col2im_add(dcol.data(), c, h, w, kh, kw, gimg);
            }
          }
        }
      });
}

/// Non-overlapping max pooling with stride = pool size and no padding;
/// remainder rows/columns are dropped. Gradient goes to the first maximum.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t pool_h, std::size_t pool_w) {
  detail::require_nchw("maxpool2d", input);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (pool_h == 0 || pool_w == 0) throw Error(ErrorKind::shape, "maxpool2d: pool sizes must be positive");
  if (pool_h > h || pool_w > w)
    throw Error(ErrorKind::shape, "maxpool2d: pool (" + std::to_string(pool_h) + "," + std::to_string(pool_w) +
                                      ") larger than input plane " + std::to_string(h) + "x" + std::to_string(w));
  const std::size_t oh = h / pool_h, ow = w / pool_w;
  auto in = input.values();
  std::vector<T> out(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t idx = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++idx) {
        std::size_t best = base + (oy * pool_h) * w + ox * pool_w;
        T best_v = in[best];
        for (std::size_t i = 0; i < pool_h; ++i) {
          const std::size_t row = base + (oy * pool_h + i) * w + ox * pool_w;
          for (std::size_t j = 0; j < pool_w; ++j)
            if (in[row + j] > best_v) {
              best_v = in[row + j];
              best = row + j;
            }
        }
        out[idx] = best_v;
        (*argmax)[idx] = best;
      }
    }
  }
  return make_result<T>({n, c, oh, ow}, std::move(out), "maxpool2d", {input}, [input, argmax](TensorImpl<T>& o) mutable {
    if (!input.requires_grad()) return;
    auto& gi = input.impl()->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) gi[(*argmax)[i]] += o.grad[i];
  });
}

/// Per-channel running statistics. Unset until the first training batch,
/// which copies its statistics in; later batches blend with `momentum`.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  bool initialized = false;
  double momentum = 0.99;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState& state,
                    Mode mode) {
  detail::require_nchw("batchnorm", input);
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.numel() != c || beta.numel() != c || state.running_mean.size() != c)
    throw Error(ErrorKind::shape, "batchnorm: parameters do not match " + std::to_string(c) + " channels");
  const std::size_t m = n * hw;
  auto in = input.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<T> out(in.size());

  if (mode == Mode::infer) {
    if (!state.initialized)
      throw Error(ErrorKind::uninitialized_stats, "batchnorm inference before any training update");
    auto inv_std = std::make_shared<std::vector<T>>(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      (*inv_std)[ch] = static_cast<T>(1.0 / std::sqrt(state.running_var[ch] + state.eps));
      const T mu = static_cast<T>(state.running_mean[ch]);
      const T scale = gv[ch] * (*inv_std)[ch];
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t off = (b * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) out[off + p] = (in[off + p] - mu) * scale + bv[ch];
      }
    }
    std::vector<T> mean_copy(c);
    for (std::size_t ch = 0; ch < c; ++ch) mean_copy[ch] = static_cast<T>(state.running_mean[ch]);
    return make_result<T>(input.shape(), std::move(out), "batchnorm", {input, gamma, beta},
                          [input, gamma, beta, inv_std, mean_copy, n, c, hw](TensorImpl<T>& o) mutable {
                            auto in = input.values();
                            auto gv = gamma.values();
                            T* gi = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
                            T* gg = gamma.requires_grad() ? gamma.impl()->grad_buffer().data() : nullptr;
                            T* gb = beta.requires_grad() ? beta.impl()->grad_buffer().data() : nullptr;
                            for (std::size_t ch = 0; ch < c; ++ch) {
                              const T is = (*inv_std)[ch];
                              double sg = 0.0, sgx = 0.0;
                              for (std::size_t b = 0; b < n; ++b) {
                                const std::size_t off = (b * c + ch) * hw;
                                for (std::size_t p = 0; p < hw; ++p) {
                                  const T g = o.grad[off + p];
                                  sg += g;
                                  sgx += g * (in[off + p] - mean_copy[ch]) * is;
                                  if (gi) gi[off + p] += g * gv[ch] * is;
                                }
                              }
                              if (gg) gg[ch] += static_cast<T>(sgx);
                              if (gb) gb[ch] += static_cast<T>(sg);
                            }
                          });
  }

  if (m < 2) throw Error(ErrorKind::contract, "batchnorm training needs N*H*W >= 2");
  auto xhat = std::make_shared<std::vector<T>>(in.size());
  auto inv_std = std::make_shared<std::vector<T>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) s += in[off + p];
    }
    const double mu = s / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const double dv = in[off + p] - mu;
        ss += dv * dv;
      }
    }
    const double var = ss / static_cast<double>(m);
    const double is = 1.0 / std::sqrt(var + state.eps);
    (*inv_std)[ch] = static_cast<T>(is);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const T xh = static_cast<T>((in[off + p] - mu) * is);
        (*xhat)[off + p] = xh;
        out[off + p] = gv[ch] * xh + bv[ch];
      }
    }
    if (!state.initialized) {
      state.running_mean[ch] = mu;
      state.running_var[ch] = var;
    } else {
      state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1.0 - state.momentum) * mu;
      state.running_var[ch] = state.momentum * state.running_var[ch] + (1.0 - state.momentum) * var;
    }
  }
  state.initialized = true;

  return make_result<T>(
      input.shape(), std::move(out), "batchnorm", {input, gamma, beta},
      [input, gamma, beta, xhat, inv_std, n, c, hw, m](TensorImpl<T>& o) mutable {
        auto gv = gamma.values();
        T* gi = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
        T* gg = gamma.requires_grad() ? gamma.impl()->grad_buffer().data() : nullptr;
        T* gb = beta.requires_grad() ? beta.impl()->grad_buffer().data() : nullptr;
        const double mf = static_cast<double>(m);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sgx = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
              sg += o.grad[off + p];
              sgx += static_cast<double>(o.grad[off + p]) * (*xhat)[off + p];
            }
          }
          if (gg) gg[ch] += static_cast<T>(sgx);
          if (gb) gb[ch] += static_cast<T>(sg);
          if (!gi) continue;
          // dx = gamma * inv_std / M * (M*g - sum(g) - xhat * sum(g*xhat))
          const double k = static_cast<double>(gv[ch]) * (*inv_std)[ch] / mf;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p)
              gi[off + p] += static_cast<T>(k * (mf * o.grad[off + p] - sg - (*xhat)[off + p] * sgx));
          }
        }
      });
}

/// Inverted dropout: in training, zero with probability `rate` and scale
/// survivors by 1/(1-rate). Identity in inference or when rate is 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::contract, "dropout rate must be in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) return input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(input.numel());
  for (auto& v : *mask) v = uniform01(rng) >= rate ? scale : T(0);
  auto in = input.values();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * (*mask)[i];
  return make_result<T>(input.shape(), std::move(out), "dropout", {input}, [input, mask](TensorImpl<T>& o) mutable {
    if (!input.requires_grad()) return;
    auto& gi = input.impl()->grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += o.grad[i] * (*mask)[i];
  });
}

/// Affine map x * W^T + b per row. x: N x F, W: out x F, b: out.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1))
    throw Error(ErrorKind::shape, "dense: input " + shape_str(x.shape()) + " does not match weights " +
                                      shape_str(weight.shape()));
  if (bias.numel() != weight.dim(0)) throw Error(ErrorKind::shape, "dense: bias does not match output units");
  return add(matmul(x, weight, false, true), bias);
}

}  // namespace fcntag::nn
