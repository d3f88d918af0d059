#pragma once

#include "gannotation/geometry.hpp"
#include "gannotation/image.hpp"

#include <filesystem>
#include <vector>

namespace gannotation {

/// Reads an 8-bit or 16-bit PNG as a 3-channel image in [0, 1] (grey is replicated, alpha dropped).
Image read_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image in [0, 1] as an 8-bit PNG (values are clamped).
void write_image(const std::filesystem::path& path, const Image& image);

/// [-1, 1] <-> [0, 1].
Image to_unit_range(const Image& signed_image);
Image to_signed_range(const Image& unit_image);

/// Draws filled disks of the given radius at each landmark.
Image overlay_landmarks(const Image& image, const LandmarkSet& shape, double radius = 2.0,
                        const Eigen::Vector3f& colour = Eigen::Vector3f(0.1f, 1.0f, 0.2f));

/// Tiles rows of equally sized images into one image, separated by a 1-pixel gap.
Image montage(const std::vector<std::vector<Image>>& rows);

}  // namespace gannotation
