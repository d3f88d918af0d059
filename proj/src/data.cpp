#include "gannotation/data.hpp"

#include "gannotation/image_io.hpp"
#include "gannotation/log.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace gannotation {

namespace fs = std::filesystem;

std::vector<std::size_t> Corpus::stills() const {
  const auto it = by_source.find(kStillsSource);
  return it == by_source.end() ? std::vector<std::size_t>{} : it->second;
}

void Corpus::add(AnnotatedImage sample) {
  if (samples.empty()) {
    point_count = sample.landmarks.size();
  } else if (sample.landmarks.size() != point_count) {
    throw std::invalid_argument("landmark count mismatch: " + sample.pts_path.string() + " has " +
                                std::to_string(sample.landmarks.size()) + " points, corpus has " +
                                std::to_string(point_count));
  }
  by_source[sample.source_id].push_back(samples.size());
  samples.push_back(std::move(sample));
}

Corpus load_corpus(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::invalid_argument("cannot open manifest " + manifest.string());
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw std::invalid_argument(manifest.string() + ":" + std::to_string(line_no) +
                                  ": expected '<image>\\t<pts>\\t<source-id>'");
    }
    AnnotatedImage sample;
    sample.image_path = resolve(fields[0]);
    sample.pts_path = resolve(fields[1]);
    sample.source_id = fields[2];
    if (!fs::is_regular_file(sample.image_path)) throw std::invalid_argument("missing image file " + sample.image_path.string());
    if (!fs::is_regular_file(sample.pts_path)) throw std::invalid_argument("missing landmark file " + sample.pts_path.string());
    sample.landmarks = read_pts(sample.pts_path);
    corpus.add(std::move(sample));
  }
  const std::size_t stills = corpus.stills().size();
  log_notice("loaded " + std::to_string(corpus.size()) + " samples (" +
             std::to_string(corpus.by_source.size() - (stills ? 1 : 0)) + " videos, " + std::to_string(stills) +
             " stills) from " + manifest.string());
  return corpus;
}

void write_manifest(const fs::path& manifest, const std::vector<AnnotatedImage>& samples) {
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write manifest " + manifest.string());
  const fs::path base = manifest.parent_path();
  for (const auto& s : samples) {
    out << fs::relative(s.image_path, base).generic_string() << '\t' << fs::relative(s.pts_path, base).generic_string()
        << '\t' << s.source_id << '\n';
  }
}

std::vector<PreparedSample> prepare_samples(const Corpus& corpus, double margin, Index out_size) {
  std::vector<PreparedSample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.samples) {
    CropResult crop = crop_by_landmarks(read_image(s.image_path), s.landmarks, margin, out_size);
    out.push_back({to_signed_range(crop.image), std::move(crop.shape), s.source_id});
  }
  return out;
}

ResolvedPair resolve_pair(std::span<const PreparedSample> samples, const TrainingPair& pair) {
  if (pair.input >= samples.size() || pair.target >= samples.size()) throw std::out_of_range("resolve_pair: index out of range");
  const PreparedSample& in = samples[pair.input];
  const PreparedSample& tgt = samples[pair.target];
  ResolvedPair r;
  r.input_image = in.image;
  r.input_shape = in.shape;
  if (pair.augmentation) {
    // Warp in [0, 1] so the zero fill reads as black.
    r.target_image = to_signed_range(apply_rigid_image(to_unit_range(tgt.image), *pair.augmentation));
    r.target_shape = apply_rigid(tgt.shape, *pair.augmentation);
  } else {
    r.target_image = tgt.image;
    r.target_shape = tgt.shape;
  }
  r.second_target = pair.second_target ? *pair.second_target : r.target_shape;
  return r;
}

std::vector<TrainingPair> build_video_pairs(const Corpus& corpus, Index pairs_per_video, std::uint64_t seed) {
  if (pairs_per_video < 0) throw std::invalid_argument("pairs_per_video must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<TrainingPair> pairs;
  for (const auto& [source, frames] : corpus.by_source) {
    if (source == kStillsSource) continue;
    if (frames.size() < 2) {
      log_warning("video '" + source + "' has fewer than 2 frames; skipped");
      continue;
    }
    const auto m = static_cast<std::int64_t>(frames.size());
    std::uniform_int_distribution<std::int64_t> first(0, m - 1);
    std::uniform_int_distribution<std::int64_t> second(0, m - 2);
    for (Index k = 0; k < pairs_per_video; ++k) {
      const auto a = first(rng);
      auto b = second(rng);
      if (b >= a) ++b;
      pairs.push_back({frames[static_cast<std::size_t>(a)], frames[static_cast<std::size_t>(b)], std::nullopt, std::nullopt});
    }
  }
  return pairs;
}

void AugmentationRanges::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) throw std::invalid_argument("augmentation scale range must be positive and ordered");
  if (!(rotation_deg >= 0.0) || !(translation >= 0.0)) throw std::invalid_argument("augmentation ranges must be non-negative");
}

namespace {
double uniform(double lo, double hi, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return lo + (hi - lo) * u;
}
}  // namespace

RigidTransform draw_rigid(const AugmentationRanges& ranges, const Eigen::Vector2d& center, std::mt19937_64& rng) {
  ranges.validate();
  RigidTransform t;
  const double r = ranges.rotation_deg * std::numbers::pi / 180.0;
  t.rotation = uniform(-r, r, rng);
  t.scale = uniform(ranges.scale_min, ranges.scale_max, rng);
  t.translation.x() = uniform(-ranges.translation, ranges.translation, rng);
  t.translation.y() = uniform(-ranges.translation, ranges.translation, rng);
  t.center = center;
  return t;
}

TrainingPair augment_still(std::span<const PreparedSample> samples, std::size_t index,
                           const AugmentationRanges& ranges, std::mt19937_64& rng) {
  if (index >= samples.size()) throw std::out_of_range("augment_still: index out of range");
  const Image& img = samples[index].image;
  const Eigen::Vector2d center((img.width - 1) / 2.0, (img.height - 1) / 2.0);
  return {index, index, draw_rigid(ranges, center, rng), std::nullopt};
}

LandmarkSet sample_second_target(const std::vector<LandmarkSet>& pool, std::mt19937_64& rng) {
  if (pool.empty()) throw std::invalid_argument("sample_second_target: empty pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

PairSampler::PairSampler(const std::vector<PreparedSample>& samples, std::vector<TrainingPair> video_pairs,
                         std::vector<std::size_t> stills, AugmentationRanges ranges, std::uint64_t seed)
    : samples_(samples), video_pairs_(std::move(video_pairs)), stills_(std::move(stills)), ranges_(ranges), rng_(seed) {
  ranges_.validate();
  if (video_pairs_.empty() && stills_.empty()) throw std::invalid_argument("PairSampler: no pairs and no stills");
  for (const auto& s : samples) pool_.push_back(s.shape);
}

Batch PairSampler::next_batch(Index batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  Batch batch;
  std::uniform_int_distribution<std::size_t> pick(0, source_count() - 1);
  for (Index b = 0; b < batch_size; ++b) {
    const std::size_t r = pick(rng_);
    TrainingPair pair = r < video_pairs_.size() ? video_pairs_[r]
                                                : augment_still(samples_, stills_[r - video_pairs_.size()], ranges_, rng_);
    pair.second_target = sample_second_target(pool_, rng_);
    ResolvedPair resolved = resolve_pair(samples_, pair);
    batch.input.push_back(std::move(resolved.input_image));
    batch.target.push_back(std::move(resolved.target_image));
    batch.input_shapes.push_back(std::move(resolved.input_shape));
    batch.target_shapes.push_back(std::move(resolved.target_shape));
    batch.second_targets.push_back(std::move(resolved.second_target));
  }
  return batch;
}

std::string PairSampler::rng_state() const {
  std::ostringstream out;
  out << rng_;
  return out.str();
}

void PairSampler::set_rng_state(const std::string& state) {
  std::istringstream in(state);
  in >> rng_;
  if (!in) throw std::invalid_argument("corrupt sampler RNG state");
}

}  // namespace gannotation
