#include "gannotation/image.hpp"

#include <algorithm>
#include <cmath>

namespace gannotation {

float sample_bilinear(const Image& image, Index channel, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const Index x0 = static_cast<Index>(fx);
  const Index y0 = static_cast<Index>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto tap = [&](Index xx, Index yy) -> double {
    if (xx < 0 || yy < 0 || xx >= image.width || yy >= image.height) return 0.0;
    return image.at(channel, yy, xx);
  };
  const double v = (1 - ay) * ((1 - ax) * tap(x0, y0) + ax * tap(x0 + 1, y0)) +
                   ay * ((1 - ax) * tap(x0, y0 + 1) + ax * tap(x0 + 1, y0 + 1));
  return static_cast<float>(v);
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("resize_bilinear: non-positive size");
  Image out(image.channels, height, width);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  for (Index c = 0; c < image.channels; ++c) {
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) {
        // Clamp so the border is not darkened by the zero fill.
        const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
        const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
        out.at(c, y, x) = sample_bilinear(image, c, u, v);
      }
    }
  }
  return out;
}

}  // namespace gannotation
