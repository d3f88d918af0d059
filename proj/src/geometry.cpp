#include "gannotation/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gannotation {

LandmarkSet::LandmarkSet(Points2d p) : points(std::move(p)) {
  if (points.rows() < 2) throw std::invalid_argument("a landmark set needs at least 2 points");
  if (!points.allFinite()) throw std::invalid_argument("landmark coordinates must be finite");
}

Eigen::VectorXd LandmarkSet::flattened() const {
  Eigen::VectorXd v(2 * size());
  for (Index i = 0; i < size(); ++i) {
    v[2 * i] = points(i, 0);
    v[2 * i + 1] = points(i, 1);
  }
  return v;
}

LandmarkSet LandmarkSet::from_flattened(const Eigen::VectorXd& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("flattened landmark vector has odd length");
  Points2d p(v.size() / 2, 2);
  for (Index i = 0; i < p.rows(); ++i) p.row(i) << v[2 * i], v[2 * i + 1];
  return LandmarkSet(std::move(p));
}

Eigen::Vector2d RigidTransform::apply(const Eigen::Vector2d& p) const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  const Eigen::Vector2d d = p - center;
  return scale * Eigen::Vector2d(c * d.x() - s * d.y(), s * d.x() + c * d.y()) + center + translation;
}

RigidTransform RigidTransform::inverse() const {
  validate();
  RigidTransform inv;
  inv.rotation = -rotation;
  inv.scale = 1.0 / scale;
  inv.center = center;
  const double c = std::cos(-rotation);
  const double s = std::sin(-rotation);
  inv.translation = -inv.scale * Eigen::Vector2d(c * translation.x() - s * translation.y(),
                                                 s * translation.x() + c * translation.y());
  return inv;
}

void RigidTransform::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("rigid transform scale must be > 0");
  if (!std::isfinite(rotation) || !translation.allFinite() || !center.allFinite()) {
    throw std::invalid_argument("rigid transform parameters must be finite");
  }
}

ConditionMap render_heatmaps(const LandmarkSet& shape, Index width, Index height, double sigma) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("render_heatmaps: non-positive size");
  if (!(sigma > 0.0)) throw std::invalid_argument("render_heatmaps: sigma must be positive");
  ConditionMap map{Image(shape.size(), height, width), ConditionKind::heatmap};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Eigen::ArrayXd gx(width);
  Eigen::ArrayXd gy(height);
  for (Index j = 0; j < shape.size(); ++j) {
    const double px = shape.points(j, 0);
    const double py = shape.points(j, 1);
    for (Index x = 0; x < width; ++x) gx[x] = std::exp(-(x - px) * (x - px) * inv);
    for (Index y = 0; y < height; ++y) gy[y] = std::exp(-(y - py) * (y - py) * inv);
    for (Index y = 0; y < height; ++y) {
      for (Index x = 0; x < width; ++x) map.planes.at(j, y, x) = static_cast<float>(gy[y] * gx[x]);
    }
  }
  return map;
}

ConditionMap encode_onehot(const std::vector<Index>& active, Index n, Index width, Index height) {
  if (n <= 0 || width <= 0 || height <= 0) throw std::invalid_argument("encode_onehot: non-positive size");
  std::set<Index> seen;
  for (Index a : active) {
    if (a < 0 || a >= n) throw std::invalid_argument("encode_onehot: attribute index out of range");
    if (!seen.insert(a).second) throw std::invalid_argument("encode_onehot: duplicate attribute index");
  }
  ConditionMap map{Image(n, height, width), ConditionKind::onehot};
  for (Index a : active) map.planes.data.segment(a * height * width, height * width).setOnes();
  return map;
}

LandmarkSet apply_rigid(const LandmarkSet& shape, const RigidTransform& t) {
  t.validate();
  Points2d out(shape.size(), 2);
  for (Index i = 0; i < shape.size(); ++i) out.row(i) = t.apply(shape.point(i)).transpose();
  return LandmarkSet(std::move(out));
}

Image apply_rigid_image(const Image& image, const RigidTransform& t) {
  const RigidTransform inv = t.inverse();
  Image out(image.channels, image.height, image.width);
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < image.width; ++x) {
      const Eigen::Vector2d src = inv.apply(Eigen::Vector2d(x, y));
      for (Index c = 0; c < image.channels; ++c) out.at(c, y, x) = sample_bilinear(image, c, src.x(), src.y());
    }
  }
  return out;
}

LandmarkSet CropMap::forward(const LandmarkSet& s) const {
  Points2d p(s.size(), 2);
  for (Index i = 0; i < s.size(); ++i) p.row(i) = forward(s.point(i)).transpose();
  return LandmarkSet(std::move(p));
}

LandmarkSet CropMap::backward(const LandmarkSet& s) const {
  Points2d p(s.size(), 2);
  for (Index i = 0; i < s.size(); ++i) p.row(i) = backward(s.point(i)).transpose();
  return LandmarkSet(std::move(p));
}

CropResult crop_by_landmarks(const Image& image, const LandmarkSet& shape, double margin, Index out_size) {
  if (out_size <= 0) throw std::invalid_argument("crop_by_landmarks: out_size must be positive");
  if (margin < 0.0) throw std::invalid_argument("crop_by_landmarks: margin must be non-negative");
  const Eigen::Vector2d lo = shape.points.colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = shape.points.colwise().maxCoeff().transpose();
  if (!(hi.x() > lo.x()) || !(hi.y() > lo.y())) {
    throw std::invalid_argument("crop_by_landmarks: landmark bounding box has zero area");
  }
  const Eigen::Vector2d box_lo = lo.array() - margin;
  const Eigen::Vector2d extent = (hi - lo).array() + 2.0 * margin;

  // The box edges map onto the outer edges of the out_size pixel grid.
  CropMap map;
  map.scale = Eigen::Vector2d::Constant(static_cast<double>(out_size)).cwiseQuotient(extent);
  map.offset = -map.scale.cwiseProduct(box_lo).array() - 0.5;

  CropResult result;
  result.map = map;
  result.shape = map.forward(shape);
  result.image = Image(image.channels, out_size, out_size);
  for (Index y = 0; y < out_size; ++y) {
    for (Index x = 0; x < out_size; ++x) {
      const Eigen::Vector2d src = map.backward(Eigen::Vector2d(x, y));
      for (Index c = 0; c < image.channels; ++c) {
        result.image.at(c, y, x) = sample_bilinear(image, c, src.x(), src.y());
      }
    }
  }
  return result;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void pts_error(const std::string& origin, std::size_t line, const std::string& what) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + what);
}

bool parse_number(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

LandmarkSet parse_pts(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) pts_error(origin, line_no + 1, "unexpected end of file");
    ++line_no;
    return trim(line);
  };

  std::string l = next();
  if (l.rfind("version:", 0) != 0 || trim(l.substr(8)) != "1") pts_error(origin, line_no, "expected 'version: 1'");
  l = next();
  if (l.rfind("n_points:", 0) != 0) pts_error(origin, line_no, "expected 'n_points: <n>'");
  double count = 0;
  if (!parse_number(trim(l.substr(9)), count) || count < 2 || count != std::floor(count)) {
    pts_error(origin, line_no, "n_points must be an integer >= 2");
  }
  const auto n = static_cast<Index>(count);
  if (next() != "{") pts_error(origin, line_no, "expected '{'");

  Points2d points(n, 2);
  for (Index i = 0; i < n; ++i) {
    l = next();
    std::istringstream fields(l);
    std::string xs, ys, extra;
    double x = 0, y = 0;
    if (!(fields >> xs >> ys) || (fields >> extra) || !parse_number(xs, x) || !parse_number(ys, y)) {
      pts_error(origin, line_no, "expected '<x> <y>'");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) pts_error(origin, line_no, "coordinates must be finite");
    points.row(i) << x - 1.0, y - 1.0;
  }
  if (next() != "}") pts_error(origin, line_no, "expected '}' after " + std::to_string(n) + " points");
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) pts_error(origin, line_no, "unexpected content after '}'");
  }
  return LandmarkSet(std::move(points));
}

std::string format_pts(const LandmarkSet& shape) {
  std::string out = "version: 1\nn_points: " + std::to_string(shape.size()) + "\n{\n";
  for (Index i = 0; i < shape.size(); ++i) {
    out += format_double(shape.points(i, 0) + 1.0) + " " + format_double(shape.points(i, 1) + 1.0) + "\n";
  }
  out += "}\n";
  return out;
}

LandmarkSet read_pts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open landmark file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pts(buf.str(), path.string());
}

void write_pts(const std::filesystem::path& path, const LandmarkSet& shape) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write landmark file " + path.string());
  out << format_pts(shape);
}

}  // namespace gannotation
