#include "gannotation/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace gannotation {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_image(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::invalid_argument("cannot open image " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw std::invalid_argument("not a PNG image: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::invalid_argument("corrupt PNG image: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  const auto width = static_cast<Index>(png_get_image_width(png, info));
  const auto height = static_cast<Index>(png_get_image_height(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> pixels(rowbytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (Index y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(3, height, width);
  for (Index y = 0; y < height; ++y) {
    const png_byte* row = rows[static_cast<std::size_t>(y)];
    for (Index x = 0; x < width; ++x) {
      for (Index c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(row[3 * x + c]) / 255.0f;
    }
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_image: need 1 or 3 channels");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width * image.channels));
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < image.width; ++x) {
      for (Index c = 0; c < image.channels; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        row[static_cast<std::size_t>(x * image.channels + c)] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image to_unit_range(const Image& signed_image) {
  Image out = signed_image;
  out.data = (signed_image.data + 1.0f) * 0.5f;
  return out;
}

Image to_signed_range(const Image& unit_image) {
  Image out = unit_image;
  out.data = unit_image.data * 2.0f - 1.0f;
  return out;
}

Image overlay_landmarks(const Image& image, const LandmarkSet& shape, double radius, const Eigen::Vector3f& colour) {
  if (image.channels != 3) throw std::invalid_argument("overlay_landmarks: need a 3-channel image");
  Image out = image;
  for (Index i = 0; i < shape.size(); ++i) {
    const Eigen::Vector2d p = shape.point(i);
    const auto x0 = static_cast<Index>(std::floor(p.x() - radius));
    const auto y0 = static_cast<Index>(std::floor(p.y() - radius));
    const auto x1 = static_cast<Index>(std::ceil(p.x() + radius));
    const auto y1 = static_cast<Index>(std::ceil(p.y() + radius));
    for (Index y = std::max<Index>(0, y0); y <= std::min(out.height - 1, y1); ++y) {
      for (Index x = std::max<Index>(0, x0); x <= std::min(out.width - 1, x1); ++x) {
        if ((Eigen::Vector2d(x, y) - p).squaredNorm() <= radius * radius) {
          for (Index c = 0; c < 3; ++c) out.at(c, y, x) = colour[c];
        }
      }
    }
  }
  return out;
}

Image montage(const std::vector<std::vector<Image>>& rows) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("montage: nothing to tile");
  const Image& cell = rows.front().front();
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const Index gap = 1;
  Image out(cell.channels, static_cast<Index>(rows.size()) * (cell.height + gap) - gap,
            static_cast<Index>(cols) * (cell.width + gap) - gap, 1.0f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const Image& img = rows[r][c];
      if (!img.same_extent(cell)) throw std::invalid_argument("montage: cells differ in extent");
      const Index oy = static_cast<Index>(r) * (cell.height + gap);
      const Index ox = static_cast<Index>(c) * (cell.width + gap);
      for (Index ch = 0; ch < cell.channels; ++ch) {
        for (Index y = 0; y < cell.height; ++y) {
          for (Index x = 0; x < cell.width; ++x) out.at(ch, oy + y, ox + x) = img.at(ch, y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace gannotation
