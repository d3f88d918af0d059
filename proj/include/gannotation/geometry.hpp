#pragma once

#include "gannotation/image.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace gannotation {

using Points2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// n landmark locations in pixel coordinates (0-based, origin at the top-left pixel centre).
struct LandmarkSet {
  Points2d points;

  LandmarkSet() = default;
  explicit LandmarkSet(Points2d p);

  Index size() const { return points.rows(); }
  Eigen::Vector2d point(Index i) const { return points.row(i).transpose(); }
  Eigen::Vector2d centroid() const { return points.colwise().mean().transpose(); }
  /// Row-interleaved (x0, y0, x1, y1, ...) vector.
  Eigen::VectorXd flattened() const;
  static LandmarkSet from_flattened(const Eigen::VectorXd& v);
};

/// p -> scale * R(rotation) * (p - center) + center + translation.
struct RigidTransform {
  double rotation = 0.0;
  double scale = 1.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  static RigidTransform identity() { return {}; }
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
  RigidTransform inverse() const;
  void validate() const;
};

enum class ConditionKind { heatmap, onehot };

/// n planes of w x h, one per landmark (heatmap) or attribute (one-hot).
struct ConditionMap {
  Image planes;
  ConditionKind kind = ConditionKind::heatmap;
};

ConditionMap render_heatmaps(const LandmarkSet& shape, Index width, Index height, double sigma);
ConditionMap encode_onehot(const std::vector<Index>& active, Index n, Index width, Index height);

LandmarkSet apply_rigid(const LandmarkSet& shape, const RigidTransform& t);
/// Inverse-mapped bilinear warp, zero outside the source.
Image apply_rigid_image(const Image& image, const RigidTransform& t);

/// Axis-aligned affine map x' = scale * x + offset used for crops.
struct CropMap {
  Eigen::Vector2d scale = Eigen::Vector2d::Ones();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();

  Eigen::Vector2d forward(const Eigen::Vector2d& p) const { return scale.cwiseProduct(p) + offset; }
  Eigen::Vector2d backward(const Eigen::Vector2d& q) const { return (q - offset).cwiseQuotient(scale); }
  LandmarkSet forward(const LandmarkSet& s) const;
  LandmarkSet backward(const LandmarkSet& s) const;
};

struct CropResult {
  Image image;
  LandmarkSet shape;
  CropMap map;
};

/// Crops the landmark bounding box grown by margin on each side and resamples it to out_size^2.
CropResult crop_by_landmarks(const Image& image, const LandmarkSet& shape, double margin = 10.0,
                             Index out_size = 128);

// .pts files: "version: 1", "n_points: N", "{", N lines "x y" (1-based), "}".
LandmarkSet parse_pts(const std::string& text, const std::string& origin = "<string>");
std::string format_pts(const LandmarkSet& shape);
LandmarkSet read_pts(const std::filesystem::path& path);
void write_pts(const std::filesystem::path& path, const LandmarkSet& shape);

/// Shortest decimal form that round-trips exactly.
std::string format_double(double v);

}  // namespace gannotation
