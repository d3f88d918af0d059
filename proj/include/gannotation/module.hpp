#pragma once

#include "gannotation/ops.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gannotation {

template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
};

/// Owns named trainable tensors. Copies share parameter storage.
template <typename T>
class Module {
 public:
  const std::vector<Parameter<T>>& parameters() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  Index parameter_count() const {
    Index total = 0;
    for (const auto& p : params_) total += p.var.value().size();
    return total;
  }

 protected:
  Var<T> add_parameter(std::string name, Tensor<T> init, bool trainable = true) {
    Var<T> v(std::move(init), trainable);
    params_.push_back({std::move(name), v});
    return v;
  }

  /// Zero-mean normal init with std = gain / sqrt(fan_in).
  static Tensor<T> normal_init(const Shape& shape, Index fan_in, double gain, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
    Tensor<T> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
    return t;
  }

 private:
  std::vector<Parameter<T>> params_;
};

namespace layers {

template <typename T>
struct Conv {
  Var<T> weight;
  Var<T> bias;
  Conv2dGeometry geometry;
  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, geometry); }
};

template <typename T>
struct ConvTranspose {
  Var<T> weight;
  Var<T> bias;
  Conv2dGeometry geometry;
  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight, bias, geometry); }
};

template <typename T>
struct InstanceNorm {
  Var<T> gamma;
  Var<T> beta;
  Var<T> operator()(const Var<T>& x) const { return instance_norm(x, gamma, beta); }
};

template <typename T>
struct Linear {
  Var<T> weight;
  Var<T> bias;
  Var<T> operator()(const Var<T>& x) const { return linear(x, weight, bias); }
};

}  // namespace layers

}  // namespace gannotation
