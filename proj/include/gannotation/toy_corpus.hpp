#pragma once

#include "gannotation/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <random>

namespace gannotation {

/// Procedural cartoon faces with exact landmarks: each identity is a "video"
/// of random poses and expressions; stills are single frames of extra identities.
///
/// Landmarks (8): left eye, right eye, nose tip, left and right mouth corner,
/// upper lip, lower lip, chin.
inline constexpr Index kToyPointCount = 8;

struct ToyIdentity {
  Eigen::Vector3f skin, hair, eyes, mouth, background_top, background_bottom;
  double face_aspect = 1.25;  // vertical/horizontal head radius
  double hair_line = 0.45;    // fraction of the head radius covered by hair
  double eye_spacing = 0.45;
  double eye_size = 0.13;
};

struct ToyPose {
  double yaw = 0.0;    // head turn, radians
  double roll = 0.0;   // in-plane rotation, radians
  double mouth_open = 0.0;
  double scale = 1.0;
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
};

ToyIdentity random_identity(std::mt19937_64& rng);
ToyPose random_pose(std::mt19937_64& rng);

/// Renders a face in [0, 1] RGB and reports its landmarks.
Image render_toy_face(const ToyIdentity& id, const ToyPose& pose, Index size, LandmarkSet* landmarks);

struct ToyCorpusConfig {
  Index identities = 16;
  Index frames_per_identity = 32;
  Index stills = 64;
  Index image_size = 48;
  std::uint64_t seed = 7;
};

/// Writes PNG images, .pts files and manifest.tsv under `dir`; returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg);

}  // namespace gannotation
