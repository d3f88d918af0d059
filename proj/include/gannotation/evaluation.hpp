#pragma once

#include "gannotation/conditioning.hpp"
#include "gannotation/networks.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace gannotation {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Index count = 0;

  Index dim() const { return mean.size(); }
};

/// Sample mean and unbiased covariance of the rows of `features`.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
///
/// The trace term uses Tr sqrt(S_a^(1/2) S_b S_a^(1/2)), both roots taken by
/// symmetric eigendecomposition. Eigenvalues in [-tol, 0) are clipped to zero
/// with tol = clip_tolerance * max(1, largest eigenvalue); anything below
/// raises numerical_error. Results within 1e-10 relative rounding of zero
/// are reported as 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b, double clip_tolerance = 1e-6);

/// Globally pooled activations of the extractor's deepest tag, one row per image.
Eigen::MatrixXd fid_features(const FeatureExtractor<float>& extractor, const std::vector<Image>& images);

double fid(const FeatureExtractor<float>& extractor, const std::vector<Image>& a, const std::vector<Image>& b);

/// Runs a translator under no-grad over images in chunks, one condition per image.
std::vector<Image> translate_all(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                 const std::vector<Image>& images, const std::vector<LandmarkSet>& targets);

struct ProtocolStep {
  double fid_o2m = 0.0;
  double fid_progressive = 0.0;
  double reversion = 0.0;        // mean MSE(progressive output, original input)
  double prog_vs_o2m_mse = 0.0;  // mean MSE(progressive output, one-to-many output)
};

struct ProtocolReport {
  std::vector<ProtocolStep> steps;
  std::vector<std::vector<LandmarkSet>> targets;  // [step][image]
  std::vector<std::vector<Image>> o2m;            // [step][image]
  std::vector<std::vector<Image>> progressive;    // [step][image]
};

/// For each step k: one-to-many output G(I; H(t_k)) and progressive output
/// G(prev; H(t_k)) with prev the previous progressive output (I at step 1).
/// FIDs are measured against the input set.
ProtocolReport progressive_protocol(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                    const FeatureExtractor<float>& extractor, const std::vector<Image>& images,
                                    const std::vector<std::vector<LandmarkSet>>& targets);

struct RobustnessRow {
  double sigma = 0.0;
  double fid = 0.0;
};

struct RobustnessOptions {
  double rotation_deg = 5.0;
  std::uint64_t seed = 0;
};

/// Rotates each shape by a random angle within +-rotation_deg about its
/// centroid, adds isotropic Gaussian noise of std sigma, synthesizes and
/// compares against the inputs. The rotation and the unit noise draws are
/// shared across sigmas.
std::vector<RobustnessRow> robustness_protocol(const Translator<float>& g, const ConditionEncoder<float>& encoder,
                                               const FeatureExtractor<float>& extractor,
                                               const std::vector<Image>& images, const std::vector<LandmarkSet>& shapes,
                                               const std::vector<double>& sigmas, const RobustnessOptions& options = {});

/// Decimal with at least one fractional digit, shortest round-trip otherwise.
std::string format_csv_number(double v);

void write_protocol_csv(const std::filesystem::path& path, const ProtocolReport& report);
void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessRow>& rows);

/// Step x sample grid: row 0 the inputs, then one-to-many and progressive
/// rows per step, images mapped from [-1, 1].
Image protocol_montage(const std::vector<Image>& inputs, const ProtocolReport& report, Index max_samples = 8);

double mean_image_mse(const std::vector<Image>& a, const std::vector<Image>& b);

}  // namespace gannotation
