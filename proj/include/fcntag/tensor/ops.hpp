#pragma once

// Elementwise, linear-algebra, reduction and shape ops.
//
// Broadcasting is limited to what the layers need: the right operand of
// add/mul may be the same shape as the left, a single element, or a 1-D
// vector matching the left operand's last dimension.

#include <cmath>
#include <string>
#include <vector>

#include "fcntag/tensor/gemm.hpp"
#include "fcntag/tensor/tensor.hpp"

namespace fcntag {

namespace detail {

enum class Broadcast { same, scalar, last_dim };

template <typename T>
Broadcast broadcast_mode(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.numel() == 1) return Broadcast::scalar;
  if (b.rank() == 1 && b.dim(0) == a.shape().back()) return Broadcast::last_dim;
  throw Error(ErrorKind::shape, std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                                    shape_str(a.shape()));
}

inline std::size_t broadcast_index(Broadcast mode, std::size_t i, std::size_t last) {
  switch (mode) {
    case Broadcast::same: return i;
    case Broadcast::scalar: return 0;
    case Broadcast::last_dim: return i % last;
  }
  return i;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  auto mode = detail::broadcast_mode("add", a, b);
  const std::size_t last = a.shape().back();
  auto av = a.values();
  auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[detail::broadcast_index(mode, i, last)];
  return make_result<T>(a.shape(), std::move(out), "add", {a, b}, [a, b, mode, last](TensorImpl<T>& o) mutable {
    const auto& g = o.grad;
    if (a.requires_grad()) {
      auto& ga = a.impl()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.impl()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[detail::broadcast_index(mode, i, last)] += g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  auto mode = detail::broadcast_mode("mul", a, b);
  const std::size_t last = a.shape().back();
  auto av = a.values();
  auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[detail::broadcast_index(mode, i, last)];
  return make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [a, b, mode, last](TensorImpl<T>& o) mutable {
    const auto& g = o.grad;
    auto av = a.values();
    auto bv = b.values();
    if (a.requires_grad()) {
      auto& ga = a.impl()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[detail::broadcast_index(mode, i, last)];
    }
    if (b.requires_grad()) {
      auto& gb = b.impl()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[detail::broadcast_index(mode, i, last)] += g[i] * av[i];
    }
  });
}

/// (m x k) * (k x n), with optional transposition of either operand.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false) {
  if (a.rank() != 2 || b.rank() != 2)
    throw Error(ErrorKind::shape, "matmul: operands must be 2-D, got " + shape_str(a.shape()) + " and " +
                                      shape_str(b.shape()));
  const std::size_t m = trans_a ? a.dim(1) : a.dim(0);
  const std::size_t k = trans_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
  const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb)
    throw Error(ErrorKind::shape, "matmul: inner dimensions differ (" + shape_str(a.shape()) + " * " +
                                      shape_str(b.shape()) + ")");
  std::vector<T> out(m * n);
  using Ix = Eigen::Index;
  detail::gemm<T>(trans_a, trans_b, Ix(m), Ix(n), Ix(k), a.values().data(), b.values().data(), out.data(), false);
  return make_result<T>({m, n}, std::move(out), "matmul", {a, b},
                        [a, b, trans_a, trans_b, m, n, k](TensorImpl<T>& o) mutable {
                          const T* g = o.grad.data();
                          if (a.requires_grad()) {
                            T* ga = a.impl()->grad_buffer().data();
                            // dA = G * op(B)^T, stored transposed when A was.
                            if (!trans_a)
                              detail::gemm<T>(false, !trans_b, Ix(m), Ix(k), Ix(n), g, b.values().data(), ga, true);
                            else
                              detail::gemm<T>(trans_b, true, Ix(k), Ix(m), Ix(n), b.values().data(), g, ga, true);
                          }
                          if (b.requires_grad()) {
                            T* gb = b.impl()->grad_buffer().data();
                            // dB = op(A)^T * G, stored transposed when B was.
                            if (!trans_b)
                              detail::gemm<T>(!trans_a, false, Ix(k), Ix(n), Ix(m), a.values().data(), g, gb, true);
                            else
                              detail::gemm<T>(true, trans_a, Ix(n), Ix(k), Ix(m), g, a.values().data(), gb, true);
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += v;
  return make_result<T>({1}, {static_cast<T>(acc)}, "sum", {a}, [a](TensorImpl<T>& o) mutable {
    if (!a.requires_grad()) return;
    auto& ga = a.impl()->grad_buffer();
    for (auto& v : ga) v += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += v;
  const double n = static_cast<double>(a.numel());
  return make_result<T>({1}, {static_cast<T>(acc / n)}, "mean", {a}, [a, n](TensorImpl<T>& o) mutable {
    if (!a.requires_grad()) return;
    auto& ga = a.impl()->grad_buffer();
    T g = static_cast<T>(o.grad[0] / n);
    for (auto& v : ga) v += g;
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel())
    throw Error(ErrorKind::shape, "reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  std::vector<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), "reshape", {a}, [a](TensorImpl<T>& o) mutable {
    if (!a.requires_grad()) return;
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
  });
}

/// Joins tensors along `axis`; all other dimensions must agree.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis = 0) {
  if (parts.empty()) throw Error(ErrorKind::shape, "concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw Error(ErrorKind::shape, "concat: axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw Error(ErrorKind::shape, "concat: rank mismatch");
    for (std::size_t d = 0; d < ref.size(); ++d)
      if (d != axis && p.dim(d) != ref[d])
        throw Error(ErrorKind::shape, "concat: " + shape_str(p.shape()) + " incompatible with " + shape_str(ref) +
                                          " along axis " + std::to_string(axis));
    out_shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= ref[d];
  for (std::size_t d = axis + 1; d < ref.size(); ++d) inner *= ref[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<T> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
    offset += chunk;
  }
  return make_result<T>(out_shape, std::move(out), "concat", parts,
                        [parts, offsets, outer, inner, out_row, axis](TensorImpl<T>& o) mutable {
                          for (std::size_t i = 0; i < parts.size(); ++i) {
                            if (!parts[i].requires_grad()) continue;
                            auto& gp = parts[i].impl()->grad_buffer();
                            const std::size_t chunk = parts[i].dim(axis) * inner;
                            for (std::size_t r = 0; r < outer; ++r)
                              for (std::size_t j = 0; j < chunk; ++j)
                                gp[r * chunk + j] += o.grad[r * out_row + offsets[i] + j];
                          }
                        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  return make_result<T>(a.shape(), std::move(out), "relu", {a}, [a](TensorImpl<T>& o) mutable {
    if (!a.requires_grad()) return;
    auto av = a.values();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (av[i] > T(0)) ga[i] += o.grad[i];
  });
}

/// 1 / (1 + e^-x) evaluated on the branch that never exponentiates a positive number.
template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  T z = std::exp(x);
  return z / (T(1) + z);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return make_result<T>(a.shape(), std::move(out), "sigmoid", {a}, [a](TensorImpl<T>& o) mutable {
    if (!a.requires_grad()) return;
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      T s = o.values[i];
      ga[i] += o.grad[i] * s * (T(1) - s);
    }
  });
}

}  // namespace fcntag
