#pragma once

#include "gannotation/geometry.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gannotation {

/// Source id of samples that are not video frames and are paired with rigid warps of themselves.
inline const std::string kStillsSource = "stills";

struct AnnotatedImage {
  std::filesystem::path image_path;
  std::filesystem::path pts_path;
  LandmarkSet landmarks;
  std::string source_id;
};

struct Corpus {
  std::vector<AnnotatedImage> samples;
  std::map<std::string, std::vector<std::size_t>> by_source;
  Index point_count = 0;

  std::size_t size() const { return samples.size(); }
  std::vector<std::size_t> stills() const;
  void add(AnnotatedImage sample);
};

/// Manifest records: "<image-path>\t<pts-path>\t<source-id>", paths relative to the manifest.
/// Blank lines and lines starting with '#' are ignored.
Corpus load_corpus(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<AnnotatedImage>& samples);

/// A corpus entry cropped to the working frame with values in [-1, 1].
struct PreparedSample {
  Image image;
  LandmarkSet shape;
  std::string source_id;
};

std::vector<PreparedSample> prepare_samples(const Corpus& corpus, double margin, Index out_size);

/// Input and target by index into the prepared samples. For augmented stills
/// input == target and the target is the input warped by `augmentation`.
struct TrainingPair {
  std::size_t input = 0;
  std::size_t target = 0;
  std::optional<RigidTransform> augmentation;
  std::optional<LandmarkSet> second_target;
};

/// Images and shapes of a pair after applying its augmentation.
struct ResolvedPair {
  Image input_image;
  LandmarkSet input_shape;
  Image target_image;
  LandmarkSet target_shape;
  LandmarkSet second_target;
};

ResolvedPair resolve_pair(std::span<const PreparedSample> samples, const TrainingPair& pair);

/// Exactly pairs_per_video ordered pairs of distinct frames per video, drawn
/// uniformly with replacement. Videos with fewer than two frames are skipped.
std::vector<TrainingPair> build_video_pairs(const Corpus& corpus, Index pairs_per_video, std::uint64_t seed);

struct AugmentationRanges {
  double rotation_deg = 30.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double translation = 5.0;

  void validate() const;
};

RigidTransform draw_rigid(const AugmentationRanges& ranges, const Eigen::Vector2d& center, std::mt19937_64& rng);

/// Pairs a prepared still with a random rigid warp of itself about the frame centre.
TrainingPair augment_still(std::span<const PreparedSample> samples, std::size_t index,
                           const AugmentationRanges& ranges, std::mt19937_64& rng);

LandmarkSet sample_second_target(const std::vector<LandmarkSet>& pool, std::mt19937_64& rng);

struct Batch {
  std::vector<Image> input;
  std::vector<Image> target;
  std::vector<LandmarkSet> input_shapes;
  std::vector<LandmarkSet> target_shapes;
  std::vector<LandmarkSet> second_targets;

  std::size_t size() const { return input.size(); }
};

/// Deterministic stream of training batches: each element is a uniformly chosen
/// video pair or augmented still, plus a uniformly drawn second target.
class PairSampler {
 public:
  PairSampler(const std::vector<PreparedSample>& samples, std::vector<TrainingPair> video_pairs,
              std::vector<std::size_t> stills, AugmentationRanges ranges, std::uint64_t seed);

  Batch next_batch(Index batch_size);

  std::string rng_state() const;
  void set_rng_state(const std::string& state);

  std::size_t source_count() const { return video_pairs_.size() + stills_.size(); }

 private:
  std::span<const PreparedSample> samples_;  // storage owned by the caller
  std::vector<TrainingPair> video_pairs_;
  std::vector<std::size_t> stills_;
  std::vector<LandmarkSet> pool_;
  AugmentationRanges ranges_;
  std::mt19937_64 rng_;
};

}  // namespace gannotation
