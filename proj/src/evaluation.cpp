#include "gannotation/evaluation.hpp"

#include "gannotation/error.hpp"
#include "gannotation/image_io.hpp"

#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace gannotation {

namespace {

constexpr std::size_t kChunk = 16;

// Square root of a symmetric PSD matrix, clipping slightly negative eigenvalues.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double clip_tolerance, const char* what) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw numerical_error(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = clip_tolerance * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol) {
      throw numerical_error(std::string(what) + " has eigenvalue " + format_double(ev[i]) + " below -" +
                            format_double(tol));
    }
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw std::invalid_argument("gaussian_stats needs at least 2 samples");
  GaussianStats s;
  s.count = features.rows();
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centred = features.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(s.count - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b, double clip_tolerance) {
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
    throw std::invalid_argument("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ")");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov, clip_tolerance, "covariance a");
  const Eigen::MatrixXd inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_error("eigendecomposition failed for the covariance product");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double largest = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  const double tol = clip_tolerance * std::max(1.0, largest);
  // eigenvalues within rounding of zero contribute nothing
  const double floor = 64.0 * static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() * largest;
  double trace_root = 0.0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol) throw numerical_error("covariance product has eigenvalue " + format_double(ev[i]));
    if (ev[i] > floor) trace_root += std::sqrt(ev[i]);
  }
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double traces = a.cov.trace() + b.cov.trace();
  const double d = mean_term + traces - 2.0 * trace_root;
  return d <= 1e-10 * std::max(1.0, traces + mean_term) ? 0.0 : d;
}

Eigen::MatrixXd fid_features(const FeatureExtractor<float>& extractor, const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("fid_features: no images");
  NoGradGuard no_grad;
  const std::vector<std::string> tag{extractor.tags().back()};
  Eigen::MatrixXd out;
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const std::size_t end = std::min(images.size(), begin + kChunk);
    const Var<float> x = constant(stack_images<float>(std::span<const Image>(images.data() + begin, end - begin)));
    const Tensor<float> pooled = global_avg_pool(extractor.extract(x, tag).front()).value();
    const Index d = pooled.shape().sample();
    if (out.size() == 0) out.resize(static_cast<Index>(images.size()), d);
    for (Index n = 0; n < pooled.shape().n; ++n) {
      out.row(static_cast<Index>(begin) + n) = pooled.array().segment(n * d, d).cast<double>().transpose();
    }
  }
  return out;
}

double fid(const FeatureExtractor<float>& extractor, const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("fid needs at least 2 images per set");
  return frechet_distance(gaussian_stats(fid_features(extractor, a)), gaussian_stats(fid_features(extractor, b)));
}

std::vector<Image> translate_all(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                 const std::vector<Image>& images, const std::vector<LandmarkSet>& targets) {
  if (images.size() != targets.size()) throw std::invalid_argument("translate_all: one target per image required");
  NoGradGuard no_grad;
  std::vector<Image> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const std::size_t end = std::min(images.size(), begin + kChunk);
    const Var<float> x = constant(stack_images<float>(std::span<const Image>(images.data() + begin, end - begin)));
    const std::vector<LandmarkSet> t(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                                     targets.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto& img : unstack_images(g(x, constant(encoder(t))).value())) out.push_back(std::move(img));
  }
  return out;
}

double mean_image_mse(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mean_image_mse: sets differ in size or are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_extent(b[i])) throw std::invalid_argument("mean_image_mse: image extents differ");
    total += (a[i].data - b[i].data).cast<double>().square().mean();
  }
  return total / static_cast<double>(a.size());
}

ProtocolReport progressive_protocol(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                    const FeatureExtractor<float>& extractor, const std::vector<Image>& images,
                                    const std::vector<std::vector<LandmarkSet>>& targets) {
  if (targets.empty()) throw std::invalid_argument("progressive_protocol: empty target sequence");
  ProtocolReport report;
  report.targets = targets;
  std::vector<Image> prev = images;
  for (const auto& step_targets : targets) {
    std::vector<Image> o2m = translate_all(g, encoder, images, step_targets);
    std::vector<Image> prog = translate_all(g, encoder, prev, step_targets);
    ProtocolStep s;
    s.fid_o2m = fid(extractor, images, o2m);
    s.fid_progressive = fid(extractor, images, prog);
    s.reversion = mean_image_mse(prog, images);
    s.prog_vs_o2m_mse = mean_image_mse(prog, o2m);
    report.steps.push_back(s);
    prev = prog;
    report.o2m.push_back(std::move(o2m));
    report.progressive.push_back(std::move(prog));
  }
  return report;
}

std::vector<RobustnessRow> robustness_protocol(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                               const FeatureExtractor<float>& extractor,
                                               const std::vector<Image>& images, const std::vector<LandmarkSet>& shapes,
                                               const std::vector<double>& sigmas, const RobustnessOptions& options) {
  if (images.size() != shapes.size()) throw std::invalid_argument("robustness_protocol: one shape per image required");
  if (sigmas.empty()) throw std::invalid_argument("robustness_protocol: no sigmas");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] >= 0.0) || (i > 0 && sigmas[i] < sigmas[i - 1])) {
      throw std::invalid_argument("robustness_protocol: sigmas must be non-negative and ascending");
    }
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> angle(-options.rotation_deg, options.rotation_deg);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LandmarkSet> rotated;
  std::vector<Points2d> noise;
  for (const auto& s : shapes) {
    RigidTransform t;
    t.rotation = angle(rng) * std::numbers::pi / 180.0;
    t.center = s.points.colwise().mean().transpose();
    rotated.push_back(apply_rigid(s, t));
    Points2d z(s.size(), 2);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    noise.push_back(std::move(z));
  }
  std::vector<RobustnessRow> rows;
  for (double sigma : sigmas) {
    std::vector<LandmarkSet> perturbed;
    for (std::size_t i = 0; i < rotated.size(); ++i) perturbed.emplace_back(Points2d(rotated[i].points + sigma * noise[i]));
    rows.push_back({sigma, fid(extractor, images, translate_all(g, encoder, images, perturbed))});
  }
  return rows;
}

std::string format_csv_number(double v) {
  std::string s = format_double(v);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void write_protocol_csv(const std::filesystem::path& path, const ProtocolReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,fid_o2m,fid_progressive,reversion,prog_vs_o2m_mse\n";
  for (std::size_t k = 0; k < report.steps.size(); ++k) {
    const ProtocolStep& s = report.steps[k];
    out << k + 1 << ',' << format_csv_number(s.fid_o2m) << ',' << format_csv_number(s.fid_progressive) << ','
        << format_csv_number(s.reversion) << ',' << format_csv_number(s.prog_vs_o2m_mse) << '\n';
  }
}

void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sigma,fid\n";
  for (const auto& r : rows) out << format_csv_number(r.sigma) << ',' << format_csv_number(r.fid) << '\n';
}

Image protocol_montage(const std::vector<Image>& inputs, const ProtocolReport& report, Index max_samples) {
  const std::size_t n = std::min(inputs.size(), static_cast<std::size_t>(std::max<Index>(max_samples, 1)));
  auto head = [n](const std::vector<Image>& v) {
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(to_unit_range(v[i]));
    return out;
  };
  std::vector<std::vector<Image>> rows{head(inputs)};
  for (std::size_t k = 0; k < report.steps.size(); ++k) {
    rows.push_back(head(report.o2m[k]));
    rows.push_back(head(report.progressive[k]));
  }
  return montage(rows);
}

}  // namespace gannotation
