#pragma once

#include "gannotation/module.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>

namespace gannotation {

struct GeneratorConfig {
  Index image_channels = 3;
  Index condition_channels = 68;
  Index base_width = 64;
  Index n_residual = 6;
  std::uint64_t seed = 0;

  Index in_channels() const { return image_channels + condition_channels; }
};

template <typename T>
struct GeneratorOutput {
  Var<T> colour;     // tanh, in [-1, 1]
  Var<T> mask;       // logistic, in [0, 1]
  Var<T> composite;  // (1 - mask) * colour + mask * input
};

/// Callable image translator G(I; H). Losses and protocols accept any such
/// callable so they can be exercised with analytic stubs.
template <typename T>
using Translator = std::function<Var<T>(const Var<T>& image, const Var<T>& condition)>;

/// Encoder-residual-decoder generator with a colour head and a mask head:
/// 7x7 stem, two stride-2 downsamples, residual blocks, two stride-2
/// transposed convolutions and a 7x7 output layer.
template <typename T>
class Generator : public Module<T> {
 public:
  explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
    if (cfg.n_residual < 1) throw std::invalid_argument("generator needs at least one residual block");
    if (cfg.base_width < 1 || cfg.condition_channels < 1) throw std::invalid_argument("invalid generator widths");
    std::mt19937_64 rng(cfg.seed);
    const Index w = cfg.base_width;
    stem_ = conv_block("stem", cfg.in_channels(), w, {7, 1, 3}, rng);
    down1_ = conv_block("down1", w, 2 * w, {4, 2, 1}, rng);
    down2_ = conv_block("down2", 2 * w, 4 * w, {4, 2, 1}, rng);
    for (Index r = 0; r < cfg.n_residual; ++r) {
      const std::string p = "res" + std::to_string(r);
      residual_.push_back({conv_block(p + ".a", 4 * w, 4 * w, {3, 1, 1}, rng),
                           conv_block(p + ".b", 4 * w, 4 * w, {3, 1, 1}, rng)});
    }
    up1_ = up_block("up1", 4 * w, 2 * w, rng);
    up2_ = up_block("up2", 2 * w, w, rng);
    head_.geometry = {7, 1, 3};
    head_.weight = this->add_parameter("head.weight", this->normal_init(Shape{cfg.image_channels + 1, w, 7, 7}, w * 49, 0.5, rng));
    head_.bias = this->add_parameter("head.bias", Tensor<T>(Shape{1, cfg.image_channels + 1, 1, 1}));
  }

  const GeneratorConfig& config() const { return cfg_; }

  /// Number of forward passes run so far (diagnostic).
  std::size_t forward_count() const { return *forward_count_; }

  /// image: (n, 3, h, w) in [-1, 1]; condition: (n, c, h, w). When
  /// mask_override is set the mask head is replaced by that constant.
  GeneratorOutput<T> generate(const Var<T>& image, const Var<T>& condition,
                              std::optional<T> mask_override = std::nullopt) const {
    const Shape is = image.shape();
    const Shape cs = condition.shape();
    if (is.c != cfg_.image_channels) throw std::invalid_argument("generate: image has " + std::to_string(is.c) + " channels");
    if (cs.c != cfg_.condition_channels) {
      throw std::invalid_argument("generate: condition has " + std::to_string(cs.c) + " planes, expected " +
                                  std::to_string(cfg_.condition_channels));
    }
    if (is.n != cs.n || is.h != cs.h || is.w != cs.w) {
      throw std::invalid_argument("generate: image " + to_string(is) + " and condition " + to_string(cs) + " differ");
    }
    if (is.h % 4 != 0 || is.w % 4 != 0) throw std::invalid_argument("generate: spatial size must be divisible by 4");
    ++*forward_count_;

    Var<T> h = concat_channels<T>({image, condition});
    h = apply(stem_, h);
    h = apply(down1_, h);
    h = apply(down2_, h);
    for (const auto& [a, b] : residual_) h = add(h, b.norm(b.conv(apply(a, h))));
    h = apply_up(up1_, h);
    h = apply_up(up2_, h);
    const Var<T> out = head_(h);

    GeneratorOutput<T> result;
    result.colour = tanh(slice_channels(out, 0, cfg_.image_channels));
    if (mask_override) {
      result.mask = constant(Tensor<T>(Shape{is.n, 1, is.h, is.w}, *mask_override));
    } else {
      result.mask = sigmoid(slice_channels(out, cfg_.image_channels, 1));
    }
    result.composite = composite(result.colour, result.mask, image);
    return result;
  }

  Translator<T> translator() const {
    return [this](const Var<T>& image, const Var<T>& condition) { return generate(image, condition).composite; };
  }

 private:
  struct ConvBlock {
    layers::Conv<T> conv;
    layers::InstanceNorm<T> norm;
  };
  struct UpBlock {
    layers::ConvTranspose<T> conv;
    layers::InstanceNorm<T> norm;
  };

  ConvBlock conv_block(const std::string& name, Index in, Index out, Conv2dGeometry g, std::mt19937_64& rng) {
    ConvBlock b;
    b.conv.geometry = g;
    b.conv.weight = this->add_parameter(name + ".weight",
                                        this->normal_init(Shape{out, in, g.kernel, g.kernel}, in * g.kernel * g.kernel, std::sqrt(2.0), rng));
    b.conv.bias = this->add_parameter(name + ".bias", Tensor<T>(Shape{1, out, 1, 1}));
    b.norm = norm_params(name, out);
    return b;
  }

  UpBlock up_block(const std::string& name, Index in, Index out, std::mt19937_64& rng) {
    UpBlock b;
    b.conv.geometry = {4, 2, 1};
    // Each output pixel of a stride-2 4x4 transposed conv sees 2x2 taps per input channel.
    b.conv.weight = this->add_parameter(name + ".weight", this->normal_init(Shape{in, out, 4, 4}, in * 4, std::sqrt(2.0), rng));
    b.conv.bias = this->add_parameter(name + ".bias", Tensor<T>(Shape{1, out, 1, 1}));
    b.norm = norm_params(name, out);
    return b;
  }

  layers::InstanceNorm<T> norm_params(const std::string& name, Index channels) {
    layers::InstanceNorm<T> n;
    n.gamma = this->add_parameter(name + ".norm.gamma", Tensor<T>(Shape{1, channels, 1, 1}, T(1)));
    n.beta = this->add_parameter(name + ".norm.beta", Tensor<T>(Shape{1, channels, 1, 1}));
    return n;
  }

  static Var<T> apply(const ConvBlock& b, const Var<T>& x) { return relu(b.norm(b.conv(x))); }
  static Var<T> apply_up(const UpBlock& b, const Var<T>& x) { return relu(b.norm(b.conv(x))); }

  GeneratorConfig cfg_;
  ConvBlock stem_, down1_, down2_;
  std::vector<std::pair<ConvBlock, ConvBlock>> residual_;
  UpBlock up1_, up2_;
  layers::Conv<T> head_;
  std::shared_ptr<std::size_t> forward_count_ = std::make_shared<std::size_t>(0);
};

struct DiscriminatorConfig {
  Index image_channels = 3;
  Index input_size = 128;
  Index base_width = 64;
  Index n_down = 5;
  Index max_channels = 512;
  double leak = 0.01;
  std::uint64_t seed = 1;

  Index channels_at(Index level) const {
    Index c = base_width;
    for (Index i = 0; i < level; ++i) c = std::min(c * 2, max_channels);
    return std::min(c, max_channels);
  }
  /// (channels, size, size) of the volume fed to the fully connected head.
  Shape pre_head_shape() const {
    Index s = input_size;
    for (Index i = 0; i < n_down; ++i) s /= 2;
    return Shape{1, channels_at(n_down - 1), s, s};
  }
};

/// Strided 4x4 convolutions with leaky rectification, then one linear score.
template <typename T>
class Discriminator : public Module<T> {
 public:
  explicit Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    if (cfg.n_down < 1) throw std::invalid_argument("discriminator needs at least one block");
    Index s = cfg.input_size;
    for (Index i = 0; i < cfg.n_down; ++i) {
      if (s % 2 != 0) throw std::invalid_argument("discriminator input size not divisible by 2^n_down");
      s /= 2;
    }
    std::mt19937_64 rng(cfg.seed);
    Index in = cfg.image_channels;
    for (Index i = 0; i < cfg.n_down; ++i) {
      const Index out = cfg.channels_at(i);
      layers::Conv<T> c;
      c.geometry = {4, 2, 1};
      const std::string p = "block" + std::to_string(i);
      c.weight = this->add_parameter(p + ".weight", this->normal_init(Shape{out, in, 4, 4}, in * 16, std::sqrt(2.0), rng));
      c.bias = this->add_parameter(p + ".bias", Tensor<T>(Shape{1, out, 1, 1}));
      blocks_.push_back(c);
      in = out;
    }
    const Index features = cfg.pre_head_shape().sample();
    head_.weight = this->add_parameter("head.weight", this->normal_init(Shape{1, features, 1, 1}, features, 1.0, rng));
    head_.bias = this->add_parameter("head.bias", Tensor<T>(Shape{1, 1, 1, 1}));
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  Var<T> features(const Var<T>& images) const {
    const Shape s = images.shape();
    if (s.c != cfg_.image_channels || s.h != cfg_.input_size || s.w != cfg_.input_size) {
      throw std::invalid_argument("discriminate: expected (n," + std::to_string(cfg_.image_channels) + "," +
                                  std::to_string(cfg_.input_size) + "," + std::to_string(cfg_.input_size) +
                                  ") input, got " + to_string(s));
    }
    Var<T> h = images;
    for (const auto& b : blocks_) h = leaky_relu(b(h), static_cast<T>(cfg_.leak));
    return h;
  }

  /// (n, 3, s, s) -> (n, 1, 1, 1) scores.
  Var<T> discriminate(const Var<T>& images) const { return head_(features(images)); }

 private:
  DiscriminatorConfig cfg_;
  std::vector<layers::Conv<T>> blocks_;
  layers::Linear<T> head_;
};

/// Exposes named intermediate activations of an image network.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<std::string> tags() const = 0;
  /// One activation stack per requested tag, in request order.
  virtual std::vector<Var<T>> extract(const Var<T>& images, const std::vector<std::string>& tags) const = 0;
};

struct RandomConvExtractorConfig {
  Index image_channels = 3;
  Index base_width = 8;
  std::uint64_t seed = 1234;
};

/// Fixed random-weight stand-in for a pretrained extractor: four conv+ReLU
/// stages separated by 2x2 average pooling, tagged relu1..relu4.
template <typename T>
class RandomConvExtractor : public FeatureExtractor<T>, public Module<T> {
 public:
  explicit RandomConvExtractor(const RandomConvExtractorConfig& cfg = {}) {
    std::mt19937_64 rng(cfg.seed);
    const Index w = cfg.base_width;
    const Index widths[5] = {cfg.image_channels, w, 2 * w, 2 * w, 4 * w};
    for (int i = 0; i < 4; ++i) {
      layers::Conv<T> c;
      c.geometry = {3, 1, 1};
      const std::string p = "relu" + std::to_string(i + 1);
      const Index in = widths[i];
      const Index out = widths[i + 1];
      c.weight = this->add_parameter(p + ".weight", this->normal_init(Shape{out, in, 3, 3}, in * 9, std::sqrt(2.0), rng), false);
      Tensor<T> bias(Shape{1, out, 1, 1});
      std::uniform_real_distribution<double> b(-0.1, 0.1);
      for (Index j = 0; j < out; ++j) bias[j] = static_cast<T>(b(rng));
      c.bias = this->add_parameter(p + ".bias", std::move(bias), false);
      stages_.push_back(c);
    }
  }

  std::vector<std::string> tags() const override { return {"relu1", "relu2", "relu3", "relu4"}; }

  std::vector<Var<T>> extract(const Var<T>& images, const std::vector<std::string>& requested) const override {
    const auto known = tags();
    Index deepest = -1;
    for (const auto& t : requested) {
      const auto it = std::find(known.begin(), known.end(), t);
      if (it == known.end()) throw std::invalid_argument("unknown feature tag '" + t + "'");
      deepest = std::max<Index>(deepest, it - known.begin());
    }
    std::vector<Var<T>> acts;
    Var<T> h = images;
    for (Index i = 0; i <= deepest; ++i) {
      if (i > 0) h = avg_pool2(h);
      h = relu(stages_[static_cast<std::size_t>(i)](h));
      acts.push_back(h);
    }
    std::vector<Var<T>> out;
    for (const auto& t : requested) {
      out.push_back(acts[static_cast<std::size_t>(std::find(known.begin(), known.end(), t) - known.begin())]);
    }
    return out;
  }

 private:
  std::vector<layers::Conv<T>> stages_;
};

}  // namespace gannotation
