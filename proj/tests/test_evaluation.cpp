#include "support.hpp"

#include <doctest.h>

using namespace gannotation;
using namespace gannotation::testing;
namespace fs = std::filesystem;

namespace {

GaussianStats stats1(double mean, double var) {
  GaussianStats s;
  s.mean = Eigen::VectorXd::Constant(1, mean);
  s.cov = Eigen::MatrixXd::Constant(1, 1, var);
  s.count = 2;
  return s;
}

GaussianStats random_stats(Index d, std::mt19937_64& rng) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(3 * d, d, [&] { return std::normal_distribution<double>()(rng); });
  GaussianStats s = gaussian_stats(x);
  s.mean.array() += 0.5;
  return s;
}

std::vector<Image> random_images(std::size_t count, std::mt19937_64& rng, Index size = 8) {
  std::vector<Image> out;
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (std::size_t i = 0; i < count; ++i) {
    Image img(3, size, size);
    for (Index k = 0; k < img.data.size(); ++k) img.data[k] = u(rng);
    out.push_back(img);
  }
  return out;
}

std::vector<LandmarkSet> shapes_for(std::size_t count, double shift = 0.0) {
  std::vector<LandmarkSet> out;
  for (std::size_t i = 0; i < count; ++i) {
    Points2d p(3, 2);
    p << 1 + shift, 2, 5, 3 + shift, 3, 6;
    out.emplace_back(p);
  }
  return out;
}

// Adds 10 to unmarked inputs (all values <= 5) and removes it from marked ones.
Translator<float> footprint_stub() {
  return [](const Var<float>& x, const Var<float>&) {
    Tensor<float> v = x.value();
    const Index per = v.shape().sample();
    for (Index n = 0; n < v.shape().n; ++n) {
      auto seg = v.array().segment(n * per, per);
      seg += seg.maxCoeff() > 5.0f ? -10.0f : 10.0f;
    }
    return constant(v);
  };
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("gaussian statistics") {
  Eigen::MatrixXd two(2, 2);
  two << 0, 0, 2, 2;
  const GaussianStats s = gaussian_stats(two);
  CHECK(s.mean.isApprox(Eigen::Vector2d(1, 1)));
  CHECK((s.cov - Eigen::MatrixXd::Constant(2, 2, 2.0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.count == 2);

  const GaussianStats same = gaussian_stats(Eigen::MatrixXd::Constant(5, 3, 0.7));
  CHECK(same.cov.cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd one(2, 1);
  one << -1, 1;
  const GaussianStats u = gaussian_stats(one);
  CHECK(u.mean[0] == 0.0);
  CHECK(u.cov(0, 0) == 2.0);
  CHECK_THROWS_AS(gaussian_stats(Eigen::MatrixXd::Zero(1, 3)), std::invalid_argument);

  std::mt19937_64 rng(1);
  const GaussianStats r = random_stats(6, rng);
  CHECK((r.cov - r.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.cov).eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("frechet distance closed forms") {
  CHECK(frechet_distance(stats1(0, 1), stats1(1, 1)) == 1.0);
  CHECK(frechet_distance(stats1(0, 1), stats1(0, 4)) == 1.0);
  std::mt19937_64 rng(2);
  const GaussianStats a = random_stats(5, rng);
  CHECK(std::abs(frechet_distance(a, a)) < 1e-8);
  CHECK_THROWS_AS(frechet_distance(a, stats1(0, 1)), std::invalid_argument);
}

TEST_CASE("frechet distance is symmetric") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianStats a = random_stats(8, rng), b = random_stats(8, rng);
    CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) < 1e-8);
    CHECK(frechet_distance(a, b) > 0.0);
  }
}

TEST_CASE("diagonal covariances match the per-dimension formula") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 3.0), m(-2.0, 2.0);
  for (Index d = 1; d <= 16; ++d) {
    GaussianStats a, b;
    a.mean = Eigen::VectorXd::NullaryExpr(d, [&] { return m(rng); });
    b.mean = Eigen::VectorXd::NullaryExpr(d, [&] { return m(rng); });
    const Eigen::VectorXd va = Eigen::VectorXd::NullaryExpr(d, [&] { return u(rng); });
    const Eigen::VectorXd vb = Eigen::VectorXd::NullaryExpr(d, [&] { return u(rng); });
    a.cov = va.asDiagonal();
    b.cov = vb.asDiagonal();
    double oracle = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double dm = a.mean[i] - b.mean[i];
      oracle += dm * dm + va[i] + vb[i] - 2.0 * std::sqrt(va[i] * vb[i]);
    }
    CHECK(std::abs(frechet_distance(a, b) - oracle) < 1e-8);
  }
}

TEST_CASE("clipping policy") {
  GaussianStats a = stats1(0, 1), b = stats1(0, 1);
  a.cov(0, 0) = -1e-9;  // within tolerance
  CHECK(std::isfinite(frechet_distance(a, b)));
  a.cov(0, 0) = -1e-3;
  CHECK_THROWS_AS(frechet_distance(a, b), numerical_error);
}

TEST_CASE("fid on images") {
  std::mt19937_64 rng(5);
  const RandomConvExtractor<float> ext;
  const auto x = random_images(6, rng);
  CHECK(std::abs(fid(ext, x, x)) < 1e-6);

  const std::vector<Image> black(4, Image(3, 8, 8, -1.0f)), white(4, Image(3, 8, 8, 1.0f));
  CHECK(fid(ext, black, white) > 0.0);

  const auto y = random_images(6, rng);
  auto shuffled = x;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[0], shuffled[2]);
  const double base = fid(ext, x, y);
  CHECK(std::abs(fid(ext, shuffled, y) - base) < 1e-9 * std::max(1.0, base));
  CHECK_THROWS_AS(fid(ext, {x[0]}, y), std::invalid_argument);
}

TEST_CASE("fid with the extractor bypassed matches the fitted statistics") {
  std::mt19937_64 rng(6);
  const Index d = 4;
  auto draw = [&](double shift) {
    std::vector<Image> imgs;
    Eigen::MatrixXd feats(30, d);
    for (Index n = 0; n < 30; ++n) {
      Image img(d, 1, 1);
      for (Index c = 0; c < d; ++c) {
        img.data[c] = static_cast<float>(std::normal_distribution<double>(shift, 1.0 + c)(rng));
        feats(n, c) = img.data[c];
      }
      imgs.push_back(img);
    }
    return std::pair{imgs, feats};
  };
  const auto [ia, fa] = draw(0.0);
  const auto [ib, fb] = draw(0.5);
  const PassThroughExtractor<float> pass;
  CHECK(fid(pass, ia, ib) == frechet_distance(gaussian_stats(fa), gaussian_stats(fb)));
}

TEST_CASE("identity stub leaves every protocol value at zero") {
  std::mt19937_64 rng(7);
  const RandomConvExtractor<float> ext;
  const auto imgs = random_images(5, rng);
  const auto enc = heatmap_encoder<float>(8, 1.0);
  const ProtocolReport r = progressive_protocol(identity_translator<float>(), enc, ext, imgs,
                                                {shapes_for(5), shapes_for(5, 1.0), shapes_for(5, 2.0)});
  REQUIRE(r.steps.size() == 3);
  for (const auto& s : r.steps) {
    CHECK(std::abs(s.fid_o2m) < 1e-6);
    CHECK(std::abs(s.fid_progressive) < 1e-6);
    CHECK(s.reversion == 0.0);
    CHECK(s.prog_vs_o2m_mse == 0.0);
  }
  const auto rows = robustness_protocol(identity_translator<float>(), enc, ext, imgs, shapes_for(5), {0.0, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].sigma == 0.0);
  CHECK(std::abs(rows[0].fid) < 1e-6);
}

TEST_CASE("first step outputs coincide") {
  std::mt19937_64 rng(8);
  const Generator<float> g(tiny_generator(3));
  const RandomConvExtractor<float> ext;
  const auto imgs = random_images(4, rng);
  const ProtocolReport one = progressive_protocol(g.translator(), heatmap_encoder<float>(8, 1.0), ext, imgs, {shapes_for(4)});
  REQUIRE(one.steps.size() == 1);
  for (std::size_t i = 0; i < imgs.size(); ++i) CHECK((one.o2m[0][i].data == one.progressive[0][i].data).all());
  CHECK(one.steps[0].prog_vs_o2m_mse == 0.0);
  CHECK_THROWS_AS(progressive_protocol(g.translator(), heatmap_encoder<float>(8, 1.0), ext, imgs, {}), std::invalid_argument);
}

TEST_CASE("footprint stub reverts on the second step") {
  std::mt19937_64 rng(9);
  const RandomConvExtractor<float> ext;
  auto imgs = random_images(4, rng);
  // Multiples of 1/64 survive the +-10 round trip exactly.
  for (auto& img : imgs) img.data = (img.data * 64.0f).round() / 64.0f;
  const ProtocolReport r = progressive_protocol(footprint_stub(), heatmap_encoder<float>(8, 1.0), ext, imgs,
                                                {shapes_for(4), shapes_for(4, 1.0)});
  CHECK(r.steps[1].reversion == 0.0);
  CHECK(mean_image_mse(r.o2m[1], imgs) == doctest::Approx(100.0));
  CHECK(r.steps[0].reversion == doctest::Approx(100.0));
  CHECK(r.steps[1].prog_vs_o2m_mse == doctest::Approx(100.0));
}

TEST_CASE("robustness shares noise across sigmas and validates the grid") {
  std::mt19937_64 rng(10);
  const RandomConvExtractor<float> ext;
  const auto imgs = random_images(6, rng);
  std::vector<LandmarkSet> seen;
  const Translator<float> spy = [&](const Var<float>& x, const Var<float>& h) { return add(x, scale(slice_channels(h, 0, 3), 0.0f)); };
  const auto enc = heatmap_encoder<float>(8, 1.0);
  const auto a = robustness_protocol(spy, enc, ext, imgs, shapes_for(6), {0.0, 1.0, 2.0});
  const auto b = robustness_protocol(spy, enc, ext, imgs, shapes_for(6), {0.0, 1.0, 2.0});
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].fid == b[i].fid);
  CHECK_THROWS_AS(robustness_protocol(spy, enc, ext, imgs, shapes_for(6), {1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(robustness_protocol(spy, enc, ext, imgs, shapes_for(6), {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(robustness_protocol(spy, enc, ext, imgs, shapes_for(5), {0.0}), std::invalid_argument);
}

TEST_CASE("csv reports and montage") {
  CHECK(format_csv_number(0.0) == "0.0");
  CHECK(format_csv_number(2.0) == "2.0");
  CHECK(format_csv_number(0.25) == "0.25");
  CHECK(format_csv_number(1e-20) == "1e-20");

  const fs::path dir = fresh_dir("csv");
  ProtocolReport r;
  r.steps = {{1.5, 2.0, 0.0, 0.125}, {3.0, 4.25, 0.5, 1.0}};
  write_protocol_csv(dir / "p.csv", r);
  CHECK(read_file(dir / "p.csv") == "step,fid_o2m,fid_progressive,reversion,prog_vs_o2m_mse\n1,1.5,2.0,0.0,0.125\n2,3.0,4.25,0.5,1.0\n");
  write_robustness_csv(dir / "r.csv", {{0.0, 0.0}, {1.0, 0.75}});
  CHECK(read_file(dir / "r.csv") == "sigma,fid\n0.0,0.0\n1.0,0.75\n");

  std::mt19937_64 rng(11);
  const auto imgs = random_images(3, rng);
  r.o2m = {imgs, imgs};
  r.progressive = {imgs, imgs};
  const Image m = protocol_montage(imgs, r);
  CHECK(m.channels == 3);
  CHECK(m.height == 5 * 8 + 4);
  CHECK(m.width == 3 * 8 + 2);
}

}  // TEST_SUITE
