#pragma once

#include "gannotation/evaluation.hpp"
#include "gannotation/losses.hpp"
#include "gannotation/training.hpp"

#include <filesystem>
#include <fstream>
#include <array>
#include <functional>
#include <set>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

namespace gannotation::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(s);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

/// Largest elementwise gap between analytic and central-difference gradients,
/// relative to max(|a|, |n|, 1e-3 * max|n|).
struct GradCheck {
  double max_relative_error = 0.0;
  Index checked = 0;
};

/// `loss` builds a scalar from the current value of `x`; entries listed in
/// `indices` (all entries when empty) are perturbed by +-h.
inline GradCheck check_gradient(const std::function<Var<double>()>& loss, Var<double> x,
                                std::vector<Index> indices = {}, double h = 1e-6) {
  if (indices.empty()) {
    for (Index i = 0; i < x.value().size(); ++i) indices.push_back(i);
  }
  x.zero_grad();
  loss().backward();
  const Tensor<double> analytic = x.grad();
  std::vector<double> numeric;
  for (Index i : indices) {
    const double orig = x.value()[i];
    x.mutable_value()[i] = orig + h;
    const double up = loss().item();
    x.mutable_value()[i] = orig - h;
    const double down = loss().item();
    x.mutable_value()[i] = orig;
    numeric.push_back((up - down) / (2 * h));
  }
  double scale = 0.0;
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  GradCheck r;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double a = analytic[indices[k]];
    const double n = numeric[k];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-3 * scale, 1e-12});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(a - n) / denom);
  }
  r.checked = static_cast<Index>(indices.size());
  return r;
}

template <typename T>
Translator<T> identity_translator() {
  return [](const Var<T>& image, const Var<T>&) { return image; };
}

/// Returns its input unchanged for every tag.
template <typename T>
class PassThroughExtractor : public FeatureExtractor<T> {
 public:
  std::vector<std::string> tags() const override { return {"relu1", "relu2", "relu3", "relu4"}; }
  std::vector<Var<T>> extract(const Var<T>& images, const std::vector<std::string>& requested) const override {
    return std::vector<Var<T>>(requested.size(), images);
  }
};

inline GeneratorConfig tiny_generator(Index points, Index width = 4) {
  GeneratorConfig g;
  g.condition_channels = points;
  g.base_width = width;
  g.n_residual = 1;
  g.seed = 11;
  return g;
}

/// Small networks on 32 x 32 toy crops.
inline ModelConfig toy_model(Index points, Index width = 8) {
  ModelConfig m;
  m.generator.condition_channels = points;
  m.generator.base_width = width;
  m.generator.n_residual = 2;
  m.discriminator.input_size = 32;
  m.discriminator.base_width = 8;
  m.discriminator.n_down = 3;
  m.sigma = 1.5;
  m.image_size = 32;
  return m;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gannotation_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

/// Captures std::cerr for the lifetime of the object.
class CaptureStderr {
 public:
  CaptureStderr() : old_(std::cerr.rdbuf(buffer_.rdbuf())) {}
  ~CaptureStderr() { std::cerr.rdbuf(old_); }
  std::string text() const { return buffer_.str(); }

 private:
  std::stringstream buffer_;
  std::streambuf* old_;
};

}  // namespace gannotation::testing
