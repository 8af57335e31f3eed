#pragma once

// Name-based entry point over the closed op set, used by tooling and tests
// that drive ops generically.

#include <span>
#include <string>
#include <vector>

#include "fcntag/nn/functional.hpp"

namespace fcntag::nn {

enum class OpKind { add, mul, matmul, conv2d, maxpool2d, batchnorm, relu, sigmoid, dropout, mean, sum, reshape, concat };

inline const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::dropout: return "dropout";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
  }
  return "?";
}

struct OpAttrs {
  std::size_t pool_h = 0, pool_w = 0;
  Shape shape;
  std::size_t axis = 0;
  double rate = 0.0;
  Mode mode = Mode::infer;
  BatchNormState* bn_state = nullptr;
  Rng* rng = nullptr;
};

template <typename T>
Tensor<T> forward_op(OpKind op, std::span<const Tensor<T>> in, const OpAttrs& attrs = {}) {
  auto arity = [&](std::size_t k) {
    if (in.size() != k)
      throw Error(ErrorKind::shape, std::string(to_string(op)) + ": expected " + std::to_string(k) + " inputs, got " +
                                        std::to_string(in.size()));
  };
  switch (op) {
    case OpKind::add: arity(2); return add(in[0], in[1]);
    case OpKind::mul: arity(2); return mul(in[0], in[1]);
    case OpKind::matmul: arity(2); return matmul(in[0], in[1]);
    case OpKind::conv2d: arity(3); return conv2d(in[0], in[1], in[2]);
    case OpKind::maxpool2d: arity(1); return maxpool2d(in[0], attrs.pool_h, attrs.pool_w);
    case OpKind::batchnorm:
      arity(3);
      if (!attrs.bn_state) throw Error(ErrorKind::contract, "batchnorm: missing state");
      return batchnorm(in[0], in[1], in[2], *attrs.bn_state, attrs.mode);
    case OpKind::relu: arity(1); return relu(in[0]);
    case OpKind::sigmoid: arity(1); return sigmoid(in[0]);
    case OpKind::dropout: {
      arity(1);
      if (attrs.mode == Mode::train && attrs.rate > 0.0 && !attrs.rng)
        throw Error(ErrorKind::contract, "dropout: training mode needs an rng");
      Rng unused;
      return dropout(in[0], attrs.rate, attrs.mode, attrs.rng ? *attrs.rng : unused);
    }
    case OpKind::mean: arity(1); return mean(in[0]);
    case OpKind::sum: arity(1); return sum(in[0]);
    case OpKind::reshape: arity(1); return reshape(in[0], attrs.shape);
    case OpKind::concat: return concat(std::vector<Tensor<T>>(in.begin(), in.end()), attrs.axis);
  }
  throw Error(ErrorKind::contract, "unknown op");
}

}  // namespace fcntag::nn
