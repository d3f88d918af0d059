#pragma once

#include "gannotation/geometry.hpp"

#include <filesystem>
#include <optional>

namespace gannotation {

/// Point-distribution model: Procrustes mean plus k orthonormal deformation modes.
struct ShapeModel {
  LandmarkSet mean_shape;
  Eigen::MatrixXd components;  // k x 2n, rows orthonormal
  Eigen::VectorXd eigenvalues;  // non-increasing
  Index pose_index = 0;

  Index rank() const { return components.rows(); }
  Index point_count() const { return mean_shape.size(); }
};

/// A shape expressed as rigid(mean + components^T * nonrigid).
struct ShapeParameters {
  Eigen::VectorXd nonrigid;
  RigidTransform rigid;
};

/// Least-squares similarity mapping `from` onto `to`, centred at the centroid of `from`.
RigidTransform align_similarity(const LandmarkSet& from, const LandmarkSet& to);

/// Generalized Procrustes alignment followed by PCA. When no pose component is
/// given, the mode whose coefficient best tracks midline_offset is used.
ShapeModel fit_shape_model(const std::vector<LandmarkSet>& shapes, Index k,
                           std::optional<Index> pose_index = std::nullopt);

ShapeParameters estimate_parameters(const ShapeModel& model, const LandmarkSet& shape);

LandmarkSet synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& nonrigid, const RigidTransform& rigid);

/// Fitted parameters with the pose mode and the in-plane rotation zeroed.
ShapeParameters frontal_parameters(const ShapeModel& model, const LandmarkSet& shape);
/// synthesize_shape of frontal_parameters.
LandmarkSet frontalise(const ShapeModel& model, const LandmarkSet& shape);

/// Horizontal offset of the midline points (reference x within a quarter of
/// the reach of the centroid) from the midpoint of the left and right points.
double midline_offset(const LandmarkSet& shape, const LandmarkSet& reference);

void save_shape_model(const std::filesystem::path& path, const ShapeModel& model);
ShapeModel load_shape_model(const std::filesystem::path& path);

}  // namespace gannotation
