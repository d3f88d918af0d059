#pragma once

#include "gannotation/geometry.hpp"
#include "gannotation/image.hpp"

#include <functional>
#include <vector>

namespace gannotation {

/// Maps one target attribute per batch element to an (n, planes, h, w) condition tensor.
template <typename T>
using ConditionEncoder = std::function<Tensor<T>(const std::vector<LandmarkSet>&)>;

template <typename T>
Tensor<T> encode_heatmaps(const std::vector<LandmarkSet>& shapes, Index size, double sigma) {
  std::vector<Image> planes;
  planes.reserve(shapes.size());
  for (const auto& s : shapes) planes.push_back(render_heatmaps(s, size, size, sigma).planes);
  return stack_images<T>(planes);
}

template <typename T>
ConditionEncoder<T> heatmap_encoder(Index size, double sigma) {
  return [size, sigma](const std::vector<LandmarkSet>& shapes) { return encode_heatmaps<T>(shapes, size, sigma); };
}

}  // namespace gannotation
