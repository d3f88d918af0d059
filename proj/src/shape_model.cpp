#include "gannotation/shape_model.hpp"

#include "gannotation/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>

namespace gannotation {

namespace {

LandmarkSet normalized(const LandmarkSet& s) {
  Points2d p = s.points.rowwise() - s.points.colwise().mean();
  const double norm = p.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("shape with all points coincident");
  return LandmarkSet(p / norm);
}

Points2d mean_of(const std::vector<LandmarkSet>& shapes) {
  Points2d acc = Points2d::Zero(shapes.front().size(), 2);
  for (const auto& s : shapes) acc += s.points;
  return acc / static_cast<double>(shapes.size());
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  return denom > 0.0 ? da.dot(db) / denom : 0.0;
}

}  // namespace

RigidTransform align_similarity(const LandmarkSet& from, const LandmarkSet& to) {
  if (from.size() != to.size()) throw std::invalid_argument("align_similarity: point counts differ");
  const Eigen::Vector2d cf = from.centroid();
  const Eigen::Vector2d ct = to.centroid();
  std::complex<double> num = 0.0;
  double den = 0.0;
  for (Index i = 0; i < from.size(); ++i) {
    const std::complex<double> x(from.points(i, 0) - cf.x(), from.points(i, 1) - cf.y());
    const std::complex<double> y(to.points(i, 0) - ct.x(), to.points(i, 1) - ct.y());
    num += std::conj(x) * y;
    den += std::norm(x);
  }
  if (!(den > 0.0)) throw std::invalid_argument("align_similarity: degenerate source shape");
  const std::complex<double> a = num / den;
  RigidTransform t;
  t.scale = std::abs(a);
  if (!(t.scale > 0.0)) throw std::invalid_argument("align_similarity: degenerate target shape");
  t.rotation = std::arg(a);
  t.center = cf;
  t.translation = ct - cf;
  return t;
}

double midline_offset(const LandmarkSet& shape, const LandmarkSet& reference) {
  const double rx = reference.centroid().x();
  const double reach = (reference.points.col(0).array() - rx).abs().maxCoeff();
  double mid = 0.0, left = 0.0, right = 0.0;
  Index nm = 0, nl = 0, nr = 0;
  for (Index i = 0; i < shape.size(); ++i) {
    const double side = reference.points(i, 0) - rx;
    const double x = shape.points(i, 0);
    if (std::abs(side) <= 0.25 * reach) {
      mid += x;
      ++nm;
    } else if (side > 0.0) {
      right += x;
      ++nr;
    } else {
      left += x;
      ++nl;
    }
  }
  if (!nm || !nl || !nr) return 0.0;
  return mid / nm - 0.5 * (left / nl + right / nr);
}

ShapeModel fit_shape_model(const std::vector<LandmarkSet>& shapes, Index k, std::optional<Index> pose_index) {
  if (k < 1) throw std::invalid_argument("fit_shape_model: k must be >= 1");
  if (static_cast<Index>(shapes.size()) < k + 1) {
    throw std::invalid_argument("fit_shape_model: need at least k+1 = " + std::to_string(k + 1) + " shapes");
  }
  const Index n = shapes.front().size();
  for (const auto& s : shapes) {
    if (s.size() != n) throw std::invalid_argument("fit_shape_model: shapes differ in point count");
  }
  if (k > 2 * n) throw std::invalid_argument("fit_shape_model: k exceeds 2n");

  std::vector<LandmarkSet> aligned;
  aligned.reserve(shapes.size());
  for (const auto& s : shapes) aligned.push_back(normalized(s));
  const LandmarkSet reference = aligned.front();
  LandmarkSet mean = reference;
  for (int iter = 0; iter < 200; ++iter) {
    for (std::size_t i = 0; i < shapes.size(); ++i) aligned[i] = apply_rigid(shapes[i], align_similarity(shapes[i], mean));
    // Fix the gauge (rotation, scale) of the new mean against the reference.
    LandmarkSet next = normalized(LandmarkSet(mean_of(aligned)));
    next = normalized(apply_rigid(next, align_similarity(next, reference)));
    const double change = (next.points - mean.points).norm();
    mean = next;
    if (change < 1e-13) break;
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) aligned[i] = apply_rigid(shapes[i], align_similarity(shapes[i], mean));

  Eigen::MatrixXd data(static_cast<Index>(shapes.size()), 2 * n);
  for (std::size_t i = 0; i < aligned.size(); ++i) data.row(static_cast<Index>(i)) = aligned[i].flattened().transpose();
  const Eigen::RowVectorXd mu = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mu;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw numerical_error("fit_shape_model: eigendecomposition failed");

  ShapeModel model;
  model.mean_shape = LandmarkSet::from_flattened(mu.transpose());
  model.components.resize(k, 2 * n);
  model.eigenvalues.resize(k);
  const Index dim = 2 * n;
  for (Index j = 0; j < k; ++j) {
    model.components.row(j) = solver.eigenvectors().col(dim - 1 - j).transpose();
    model.eigenvalues[j] = std::max(0.0, solver.eigenvalues()[dim - 1 - j]);
  }

  if (pose_index) {
    if (*pose_index < 0 || *pose_index >= k) throw std::invalid_argument("fit_shape_model: pose index out of range");
    model.pose_index = *pose_index;
  } else {
    Eigen::VectorXd asym(data.rows());
    for (Index i = 0; i < data.rows(); ++i) asym[i] = midline_offset(aligned[static_cast<std::size_t>(i)], model.mean_shape);
    const Eigen::MatrixXd coeffs = centered * model.components.transpose();
    double best = -1.0;
    for (Index j = 0; j < k; ++j) {
      const double r = std::abs(pearson(coeffs.col(j), asym));
      if (r > best) {
        best = r;
        model.pose_index = j;
      }
    }
  }
  return model;
}

ShapeParameters estimate_parameters(const ShapeModel& model, const LandmarkSet& shape) {
  if (shape.size() != model.point_count()) throw std::invalid_argument("estimate_parameters: point count mismatch");
  const RigidTransform to_model = align_similarity(shape, model.mean_shape);
  const LandmarkSet aligned = apply_rigid(shape, to_model);
  ShapeParameters params;
  params.nonrigid = model.components * (aligned.flattened() - model.mean_shape.flattened());
  params.rigid = to_model.inverse();
  return params;
}

LandmarkSet synthesize_shape(const ShapeModel& model, const Eigen::VectorXd& nonrigid, const RigidTransform& rigid) {
  if (nonrigid.size() != model.rank()) {
    throw std::invalid_argument("synthesize_shape: expected " + std::to_string(model.rank()) + " parameters, got " +
                                std::to_string(nonrigid.size()));
  }
  const Eigen::VectorXd flat = model.mean_shape.flattened() + model.components.transpose() * nonrigid;
  return apply_rigid(LandmarkSet::from_flattened(flat), rigid);
}

ShapeParameters frontal_parameters(const ShapeModel& model, const LandmarkSet& shape) {
  ShapeParameters p = estimate_parameters(model, shape);
  p.nonrigid[model.pose_index] = 0.0;
  // Keep scale and placement; drop only the in-plane rotation.
  const Eigen::Vector2d placed = p.rigid.apply(model.mean_shape.centroid());
  p.rigid.rotation = 0.0;
  p.rigid.translation += placed - p.rigid.apply(model.mean_shape.centroid());
  return p;
}

LandmarkSet frontalise(const ShapeModel& model, const LandmarkSet& shape) {
  const ShapeParameters p = frontal_parameters(model, shape);
  return synthesize_shape(model, p.nonrigid, p.rigid);
}

void save_shape_model(const std::filesystem::path& path, const ShapeModel& model) {
  nlohmann::json j;
  j["n_points"] = model.point_count();
  const Eigen::VectorXd mean = model.mean_shape.flattened();
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  std::vector<std::vector<double>> comps;
  for (Index r = 0; r < model.rank(); ++r) {
    const Eigen::VectorXd row = model.components.row(r).transpose();
    comps.emplace_back(row.data(), row.data() + row.size());
  }
  j["components"] = comps;
  j["eigenvalues"] = std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.rank());
  j["pose_index"] = model.pose_index;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write shape model " + path.string());
  out << j.dump(1) << '\n';
}

ShapeModel load_shape_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open shape model " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  ShapeModel model;
  const auto mean = j.at("mean").get<std::vector<double>>();
  model.mean_shape = LandmarkSet::from_flattened(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size())));
  const auto comps = j.at("components").get<std::vector<std::vector<double>>>();
  model.components.resize(static_cast<Index>(comps.size()), static_cast<Index>(mean.size()));
  for (std::size_t r = 0; r < comps.size(); ++r) {
    if (comps[r].size() != mean.size()) throw std::invalid_argument("shape model component has wrong length");
    model.components.row(static_cast<Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(comps[r].data(), static_cast<Index>(comps[r].size()));
  }
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Index>(ev.size()));
  model.pose_index = j.at("pose_index").get<Index>();
  if (model.eigenvalues.size() != model.rank() || model.pose_index < 0 || model.pose_index >= model.rank()) {
    throw std::invalid_argument("inconsistent shape model file " + path.string());
  }
  return model;
}

}  // namespace gannotation
