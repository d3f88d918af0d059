#pragma once

#include "gannotation/module.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gannotation {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam betas must lie in (0, 1)");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("adam eps must be > 0");
  }
};

/// Adam over the trainable parameters of a module. Moments are kept per
/// parameter in registration order.
template <typename T>
class Adam {
 public:
  Adam(const std::vector<Parameter<T>>& params, const AdamConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : params) {
      if (!p.var.requires_grad()) continue;
      params_.push_back(p);
      m_.push_back(Tensor<T>(p.var.shape()));
      v_.push_back(Tensor<T>(p.var.shape()));
    }
  }

  /// Applies one update from the accumulated gradients, then clears them.
  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.learning_rate / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var<T>& var = params_[i].var;
      if (!var.has_grad()) continue;
      const auto& g = var.grad().array();
      auto& m = m_[i].array();
      auto& v = v_[i].array();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
      var.mutable_value().array() -= lr * m / ((v * inv_c2).sqrt() + eps);
      var.zero_grad();
    }
  }

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  AdamConfig cfg_;
  std::vector<Parameter<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t steps_ = 0;
};

}  // namespace gannotation
