#pragma once

#include "gannotation/tensor.hpp"

#include <span>
#include <vector>

namespace gannotation {

/// Planar float image, channel-major (c, y, x). Pixel (x, y) has its centre at
/// continuous coordinate (x, y); the image covers [-0.5, w - 0.5] x [-0.5, h - 0.5].
struct Image {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  Eigen::ArrayXf data;

  Image() = default;
  Image(Index c, Index h, Index w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(Eigen::ArrayXf::Constant(c * h * w, fill)) {}

  float& at(Index c, Index y, Index x) { return data[(c * height + y) * width + x]; }
  float at(Index c, Index y, Index x) const { return data[(c * height + y) * width + x]; }
  Index plane() const { return height * width; }
  bool empty() const { return data.size() == 0; }
  bool same_extent(const Image& o) const { return channels == o.channels && height == o.height && width == o.width; }
};

/// Bilinear sample of one channel at a continuous location; outside samples read as 0.
float sample_bilinear(const Image& image, Index channel, double x, double y);

/// Resamples to (height, width) so that the two images cover the same extent.
Image resize_bilinear(const Image& image, Index height, Index width);

/// Stacks equally sized images into an (n, c, h, w) tensor.
template <typename T>
Tensor<T> stack_images(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("stack_images of an empty set");
  const Image& first = images.front();
  Tensor<T> out(Shape{static_cast<Index>(images.size()), first.channels, first.height, first.width});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_extent(first)) throw std::invalid_argument("stack_images: images differ in extent");
    out.array().segment(static_cast<Index>(i) * out.shape().sample(), out.shape().sample()) =
        images[i].data.template cast<T>();
  }
  return out;
}

template <typename T>
Image unstack_image(const Tensor<T>& t, Index n) {
  const Shape s = t.shape();
  Image img(s.c, s.h, s.w);
  img.data = t.array().segment(n * s.sample(), s.sample()).template cast<float>();
  return img;
}

template <typename T>
std::vector<Image> unstack_images(const Tensor<T>& t) {
  std::vector<Image> out;
  for (Index n = 0; n < t.shape().n; ++n) out.push_back(unstack_image(t, n));
  return out;
}

}  // namespace gannotation
