#include "gannotation/toy_corpus.hpp"

#include "gannotation/data.hpp"
#include "gannotation/image_io.hpp"

#include <cmath>
#include <cstdio>

namespace gannotation {

namespace fs = std::filesystem;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Eigen::Vector3f random_colour(std::mt19937_64& rng, double lo, double hi) {
  return Eigen::Vector3f(static_cast<float>(uniform(rng, lo, hi)), static_cast<float>(uniform(rng, lo, hi)),
                         static_cast<float>(uniform(rng, lo, hi)));
}

// Landmarks in the head frame: unit = head half-width, v grows downwards.
Points2d local_landmarks(const ToyIdentity& id, const ToyPose& pose) {
  const double a = id.face_aspect;
  const double psi = pose.yaw;
  const double lip = 0.04 + 0.12 * pose.mouth_open;
  Points2d p(kToyPointCount, 2);
  p.row(0) << std::sin(psi - id.eye_spacing), -0.16 * a;
  p.row(1) << std::sin(psi + id.eye_spacing), -0.16 * a;
  p.row(2) << 1.15 * std::sin(psi), 0.15 * a;
  p.row(3) << 0.95 * std::sin(psi - 0.32), 0.5 * a;
  p.row(4) << 0.95 * std::sin(psi + 0.32), 0.5 * a;
  p.row(5) << 1.05 * std::sin(psi), 0.5 * a - lip;
  p.row(6) << 1.05 * std::sin(psi), 0.5 * a + lip;
  p.row(7) << 0.9 * std::sin(psi), 0.9 * a;
  return p;
}

struct HeadFrame {
  Eigen::Vector2d origin;
  double radius;
  double cos_r, sin_r;

  Eigen::Vector2d to_image(const Eigen::Vector2d& uv) const {
    return origin + radius * Eigen::Vector2d(cos_r * uv.x() - sin_r * uv.y(), sin_r * uv.x() + cos_r * uv.y());
  }
  Eigen::Vector2d to_local(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d d = (p - origin) / radius;
    return Eigen::Vector2d(cos_r * d.x() + sin_r * d.y(), -sin_r * d.x() + cos_r * d.y());
  }
};

}  // namespace

ToyIdentity random_identity(std::mt19937_64& rng) {
  ToyIdentity id;
  const double tone = uniform(rng, 0.35, 0.95);
  id.skin = Eigen::Vector3f(static_cast<float>(tone), static_cast<float>(tone * uniform(rng, 0.7, 0.85)),
                            static_cast<float>(tone * uniform(rng, 0.5, 0.7)));
  id.hair = random_colour(rng, 0.0, 0.9);
  id.eyes = random_colour(rng, 0.0, 0.35);
  id.mouth = Eigen::Vector3f(static_cast<float>(uniform(rng, 0.5, 0.9)), static_cast<float>(uniform(rng, 0.05, 0.25)),
                             static_cast<float>(uniform(rng, 0.1, 0.3)));
  id.background_top = random_colour(rng, 0.0, 1.0);
  id.background_bottom = random_colour(rng, 0.0, 1.0);
  id.face_aspect = uniform(rng, 1.1, 1.4);
  id.hair_line = uniform(rng, 0.32, 0.55);
  id.eye_spacing = uniform(rng, 0.38, 0.52);
  id.eye_size = uniform(rng, 0.10, 0.16);
  return id;
}

ToyPose random_pose(std::mt19937_64& rng) {
  ToyPose p;
  p.yaw = uniform(rng, -0.6, 0.6);
  p.roll = uniform(rng, -0.25, 0.25);
  p.mouth_open = uniform(rng, 0.0, 1.0);
  p.scale = uniform(rng, 0.9, 1.1);
  p.shift = Eigen::Vector2d(uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
  return p;
}

Image render_toy_face(const ToyIdentity& id, const ToyPose& pose, Index size, LandmarkSet* landmarks) {
  const double a = id.face_aspect;
  HeadFrame frame;
  frame.radius = 0.22 * static_cast<double>(size) * pose.scale;
  frame.origin = Eigen::Vector2d(size / 2.0, size / 2.0 - 0.4 * frame.radius * a) + pose.shift;
  frame.cos_r = std::cos(pose.roll);
  frame.sin_r = std::sin(pose.roll);

  const Points2d local = local_landmarks(id, pose);
  const double head_u = 0.12 * std::sin(pose.yaw);
  const double lip = 0.04 + 0.12 * pose.mouth_open;
  const Eigen::Vector2d mouth_c((local(3, 0) + local(4, 0)) / 2.0, 0.5 * a);
  const double mouth_w = std::max(0.05, (local(4, 0) - local(3, 0)) / 2.0);

  auto shade = [&](const Eigen::Vector2d& p) -> Eigen::Vector3f {
    const float t = static_cast<float>(std::clamp(p.y() / static_cast<double>(size), 0.0, 1.0));
    Eigen::Vector3f colour = (1.0f - t) * id.background_top + t * id.background_bottom;
    const Eigen::Vector2d uv = frame.to_local(p);
    const double hu = uv.x() - head_u;
    if (hu * hu + (uv.y() / a) * (uv.y() / a) > 1.0) return colour;
    if (uv.y() / a < -id.hair_line) return id.hair;
    colour = id.skin * static_cast<float>(1.0 - 0.3 * hu * hu);
    for (int e = 0; e < 2; ++e) {
      const double squash = std::max(0.3, std::cos(pose.yaw + (e == 0 ? -id.eye_spacing : id.eye_spacing)));
      const double du = (uv.x() - local(e, 0)) / squash;
      const double dv = uv.y() - local(e, 1);
      if (du * du + dv * dv < id.eye_size * id.eye_size) return id.eyes;
    }
    const double dn = (uv - local.row(2).transpose()).squaredNorm();
    if (dn < 0.07 * 0.07) return id.skin * 0.7f;
    const double mu = (uv.x() - mouth_c.x()) / mouth_w;
    const double mv = (uv.y() - mouth_c.y()) / lip;
    if (mu * mu + mv * mv < 1.0) return id.mouth;
    return colour;
  };

  Image img(3, size, size);
  const double offsets[2] = {-0.25, 0.25};
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      Eigen::Vector3f acc = Eigen::Vector3f::Zero();
      for (double oy : offsets) {
        for (double ox : offsets) acc += shade(Eigen::Vector2d(x + ox, y + oy));
      }
      acc *= 0.25f;
      for (Index c = 0; c < 3; ++c) img.at(c, y, x) = acc[c];
    }
  }
  if (landmarks) {
    Points2d pts(kToyPointCount, 2);
    for (Index i = 0; i < kToyPointCount; ++i) pts.row(i) = frame.to_image(local.row(i).transpose()).transpose();
    *landmarks = LandmarkSet(std::move(pts));
  }
  return img;
}

fs::path write_toy_corpus(const fs::path& dir, const ToyCorpusConfig& cfg) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "landmarks");
  std::mt19937_64 rng(cfg.seed);
  std::vector<AnnotatedImage> records;
  auto emit = [&](const std::string& stem, const std::string& source, const ToyIdentity& id, const ToyPose& pose) {
    LandmarkSet shape;
    const Image img = render_toy_face(id, pose, cfg.image_size, &shape);
    AnnotatedImage rec;
    rec.image_path = dir / "images" / (stem + ".png");
    rec.pts_path = dir / "landmarks" / (stem + ".pts");
    rec.landmarks = shape;
    rec.source_id = source;
    write_image(rec.image_path, img);
    write_pts(rec.pts_path, shape);
    records.push_back(std::move(rec));
  };
  char name[64];
  for (Index v = 0; v < cfg.identities; ++v) {
    const ToyIdentity id = random_identity(rng);
    std::snprintf(name, sizeof(name), "video_%03ld", static_cast<long>(v));
    const std::string source = name;
    for (Index f = 0; f < cfg.frames_per_identity; ++f) {
      std::snprintf(name, sizeof(name), "v%03ld_f%03ld", static_cast<long>(v), static_cast<long>(f));
      emit(name, source, id, random_pose(rng));
    }
  }
  for (Index s = 0; s < cfg.stills; ++s) {
    const ToyIdentity id = random_identity(rng);
    std::snprintf(name, sizeof(name), "still_%03ld", static_cast<long>(s));
    emit(name, kStillsSource, id, random_pose(rng));
  }
  const fs::path manifest = dir / "manifest.tsv";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace gannotation
