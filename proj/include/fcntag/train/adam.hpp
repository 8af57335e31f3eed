#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fcntag/tensor/tensor.hpp"

namespace fcntag::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void validate(const AdamConfig& c) {
  if (!(c.lr > 0.0)) throw Error(ErrorKind::invalid_config, "adam: lr must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0))
    throw Error(ErrorKind::invalid_config, "adam: betas must lie in [0, 1)");
  if (!(c.eps > 0.0)) throw Error(ErrorKind::invalid_config, "adam: eps must be positive");
}

/// Adam with bias-corrected moments; one moment pair per named parameter.
template <typename T>
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor<T>>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    validate(cfg_);
    for (const auto& [name, p] : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  /// Applies one update from the gradients currently stored on the parameters.
  /// Parameters without a gradient are treated as having a zero gradient.
  void step() {
    for (const auto& [name, p] : params_) {
      if (!p.has_grad()) continue;
      for (T g : p.grad())
        if (!std::isfinite(static_cast<double>(g)))
          throw Error(ErrorKind::numerical, "non-finite gradient in parameter '" + name + "' at step " +
                                                std::to_string(t_ + 1));
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].second;
      auto vals = p.values();
      auto& m = m_[i];
      auto& v = v_[i];
      const bool has = p.has_grad();
      for (std::size_t j = 0; j < vals.size(); ++j) {
        const double g = has ? static_cast<double>(p.grad()[j]) : 0.0;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[j] / c1;
        const double v_hat = v[j] / c2;
        vals[j] = static_cast<T>(static_cast<double>(vals[j]) - cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace fcntag::train
