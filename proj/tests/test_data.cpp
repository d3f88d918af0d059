#include "support.hpp"

#include "gannotation/image_io.hpp"
#include "gannotation/toy_corpus.hpp"

#include <doctest.h>

#include <numbers>

using namespace gannotation;
using namespace gannotation::testing;
namespace fs = std::filesystem;

namespace {

LandmarkSet square_shape(Index n, double offset = 0.0) {
  Points2d p(n, 2);
  for (Index i = 0; i < n; ++i) p.row(i) << 4.0 + offset + 3.0 * i, 6.0 + 2.0 * (i % 3);
  return LandmarkSet(p);
}

// Writes image/pts files and returns the matching manifest record.
AnnotatedImage write_sample(const fs::path& dir, const std::string& stem, const LandmarkSet& shape,
                            const std::string& source) {
  Image img(3, 24, 32, 0.5f);
  write_image(dir / (stem + ".png"), img);
  write_pts(dir / (stem + ".pts"), shape);
  return {dir / (stem + ".png"), dir / (stem + ".pts"), shape, source};
}

Corpus video_corpus(const std::vector<std::pair<std::string, Index>>& videos) {
  Corpus c;
  for (const auto& [name, frames] : videos) {
    for (Index f = 0; f < frames; ++f) c.add({name + std::to_string(f) + ".png", "", square_shape(3, f), name});
  }
  return c;
}

std::vector<PreparedSample> flat_samples(Index count, Index size = 32) {
  std::vector<PreparedSample> out;
  for (Index i = 0; i < count; ++i) {
    Image img(3, size, size);
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x)
        for (Index c = 0; c < 3; ++c) img.at(c, y, x) = std::sin(0.3 * x + 0.2 * y + c + i) * 0.5f;
    out.push_back({img, square_shape(4, static_cast<double>(i)), kStillsSource});
  }
  return out;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("video pairs") {
  const Corpus two = video_corpus({{"a", 2}});
  const auto pairs = build_video_pairs(two, 1, 3);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].input != pairs[0].target);
  CHECK(two.samples[pairs[0].input].source_id == "a");
  CHECK(two.samples[pairs[0].target].source_id == "a");

  const Corpus three = video_corpus({{"a", 5}, {"b", 4}, {"c", 7}});
  const auto p30 = build_video_pairs(three, 10, 1);
  CHECK(p30.size() == 30);
  for (const auto& p : p30) {
    CHECK(p.input != p.target);
    CHECK(three.samples[p.input].source_id == three.samples[p.target].source_id);
    CHECK_FALSE(p.augmentation.has_value());
  }
  const auto again = build_video_pairs(three, 10, 1);
  bool same = true;
  for (std::size_t i = 0; i < 30; ++i) same = same && (again[i].input == p30[i].input && again[i].target == p30[i].target);
  CHECK(same);

  CaptureStderr capture;
  const Corpus lonely = video_corpus({{"a", 3}, {"solo", 1}});
  CHECK(build_video_pairs(lonely, 4, 0).size() == 4);
  CHECK(capture.text().find("solo") != std::string::npos);
}

TEST_CASE("video pairs cover every ordered frame pair") {
  const Corpus c = video_corpus({{"a", 3}});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : build_video_pairs(c, 300, 5)) seen.insert({p.input, p.target});
  CHECK(seen.size() == 6);
}

TEST_CASE("still augmentation") {
  const auto samples = flat_samples(1);
  std::mt19937_64 rng(1);
  AugmentationRanges none{0.0, 1.0, 1.0, 0.0};
  const ResolvedPair id = resolve_pair(samples, augment_still(samples, 0, none, rng));
  CHECK((id.target_image.data - id.input_image.data).abs().maxCoeff() < 1e-5f);
  CHECK((id.target_shape.points - id.input_shape.points).cwiseAbs().maxCoeff() < 1e-12);

  const AugmentationRanges defaults;
  for (int trial = 0; trial < 20; ++trial) {
    const TrainingPair p = augment_still(samples, 0, defaults, rng);
    REQUIRE(p.augmentation.has_value());
    const ResolvedPair r = resolve_pair(samples, p);
    CHECK((r.target_shape.points - apply_rigid(r.input_shape, *p.augmentation).points).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(p.augmentation->rotation) <= 30.0 * std::numbers::pi / 180.0);
    CHECK(p.augmentation->scale >= 0.9);
    CHECK(p.augmentation->scale <= 1.1);
    CHECK(r.target_image.data.abs().maxCoeff() <= 1.0f);
  }

  AugmentationRanges rotate_only{45.0, 1.0, 1.0, 0.0};
  const Eigen::Vector2d center(15.5, 15.5);
  for (int trial = 0; trial < 20; ++trial) {
    const TrainingPair p = augment_still(samples, 0, rotate_only, rng);
    const ResolvedPair r = resolve_pair(samples, p);
    CHECK(std::abs((r.target_shape.centroid() - center).norm() - (r.input_shape.centroid() - center).norm()) < 1e-6);
  }

  AugmentationRanges bad;
  bad.scale_min = 0.0;
  CHECK_THROWS_AS(augment_still(samples, 0, bad, rng), std::invalid_argument);
}

TEST_CASE("second targets") {
  std::mt19937_64 rng(2);
  const std::vector<LandmarkSet> one{square_shape(3)};
  for (int i = 0; i < 10; ++i) CHECK(sample_second_target(one, rng).points == one[0].points);
  CHECK_THROWS_AS(sample_second_target({}, rng), std::invalid_argument);

  std::vector<LandmarkSet> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(square_shape(3, i));
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 50; ++i) CHECK(sample_second_target(pool, a).points == sample_second_target(pool, b).points);

  const int draws = 10000;
  std::array<int, 4> counts{};
  for (int i = 0; i < draws; ++i) {
    const LandmarkSet s = sample_second_target(pool, rng);
    ++counts[static_cast<std::size_t>(std::lround(s.points(0, 0) - 4.0))];
  }
  const double sd = std::sqrt(draws * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - draws * 0.25) < 3.0 * sd);
}

TEST_CASE("load corpus") {
  const fs::path dir = fresh_dir("load_corpus");
  std::vector<AnnotatedImage> rec{write_sample(dir, "a", square_shape(5), "v1"), write_sample(dir, "b", square_shape(5, 1), "v1"),
                                  write_sample(dir, "c", square_shape(5, 2), kStillsSource)};
  write_manifest(dir / "m.tsv", rec);
  {
    CaptureStderr quiet;
    const Corpus c = load_corpus(dir / "m.tsv");
    CHECK(c.size() == 3);
    CHECK(c.point_count == 5);
    CHECK(c.by_source.at("v1").size() == 2);
    CHECK(c.stills().size() == 1);
    CHECK(quiet.text().find("3 samples") != std::string::npos);
  }

  write_file(dir / "missing.tsv", "a.png\tnope.pts\tv1\n");
  try {
    load_corpus(dir / "missing.tsv");
    FAIL("expected failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find((dir / "nope.pts").string()) != std::string::npos);
  }

  const AnnotatedImage big = write_sample(dir, "d", square_shape(68), "v2");
  write_manifest(dir / "mixed.tsv", {rec[0], big});
  try {
    load_corpus(dir / "mixed.tsv");
    FAIL("expected failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("mismatch") != std::string::npos);
  }

  write_file(dir / "bad.tsv", "# comment\n\na.png a.pts v1\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "bad.tsv"), doctest::Contains("bad.tsv:3"), std::invalid_argument);
  CHECK_THROWS_AS(load_corpus(dir / "absent.tsv"), std::invalid_argument);
}

TEST_CASE("prepared toy samples are cropped and signed") {
  const fs::path dir = fresh_dir("prepare");
  ToyCorpusConfig cfg;
  cfg.identities = 2;
  cfg.frames_per_identity = 3;
  cfg.stills = 2;
  cfg.image_size = 40;
  const auto manifest = write_toy_corpus(dir, cfg);
  CaptureStderr quiet;
  const Corpus c = load_corpus(manifest);
  CHECK(c.size() == 8);
  CHECK(c.point_count == kToyPointCount);
  const auto prepared = prepare_samples(c, 4.0, 32);
  for (const auto& s : prepared) {
    CHECK(s.image.width == 32);
    CHECK(s.image.height == 32);
    CHECK(s.image.data.minCoeff() >= -1.0f);
    CHECK(s.image.data.maxCoeff() <= 1.0f);
    CHECK(s.image.data.minCoeff() < 0.0f);
  }
}

TEST_CASE("pair sampler is deterministic and restorable") {
  const auto samples = flat_samples(4);
  const std::vector<TrainingPair> pairs{{0, 1, std::nullopt, std::nullopt}, {1, 0, std::nullopt, std::nullopt}};
  PairSampler a(samples, pairs, {2, 3}, AugmentationRanges{}, 4);
  PairSampler b(samples, pairs, {2, 3}, AugmentationRanges{}, 4);
  const Batch x = a.next_batch(6), y = b.next_batch(6);
  CHECK(x.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK((x.target[i].data - y.target[i].data).abs().maxCoeff() == 0.0f);
    CHECK(x.second_targets[i].points == y.second_targets[i].points);
  }
  const std::string state = a.rng_state();
  const Batch next = a.next_batch(3);
  b.set_rng_state(state);
  const Batch replay = b.next_batch(3);
  for (std::size_t i = 0; i < 3; ++i) CHECK((next.input[i].data - replay.input[i].data).abs().maxCoeff() == 0.0f);
  CHECK_THROWS_AS(b.set_rng_state("garbage"), std::invalid_argument);
  CHECK_THROWS_AS(PairSampler(samples, {}, {}, AugmentationRanges{}, 0), std::invalid_argument);
}

}  // TEST_SUITE
