#include "support.hpp"

#include <doctest.h>

using namespace gannotation;
using namespace gannotation::testing;

namespace {

constexpr double kTol = 1e-4;

Var<double> leaf(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Var<double>(random_tensor<double>(s, rng, lo, hi), true);
}

// Subset of parameter entries so large weight tensors stay cheap.
std::vector<Index> sample_indices(Index size, Index count, std::mt19937_64& rng) {
  if (size <= count) return {};
  std::uniform_int_distribution<Index> u(0, size - 1);
  std::vector<Index> out;
  for (Index i = 0; i < count; ++i) out.push_back(u(rng));
  return out;
}

// Weighted sum with fixed random coefficients, so every output entry matters.
Var<double> project(const Var<double>& x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(x, constant(random_tensor<double>(x.shape(), rng))));
}

}  // namespace

TEST_SUITE("gradients") {

TEST_CASE("elementwise and reduction ops") {
  std::mt19937_64 rng(1);
  const Shape s{2, 3, 4, 4};
  Var<double> x = leaf(s, rng);
  const Var<double> y = constant(random_tensor<double>(s, rng));
  CHECK(check_gradient([&] { return project(add(x, y)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(sub(y, x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(mul(x, x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(scale(x, 2.5)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(relu(x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(leaky_relu(x, 0.2)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(tanh(x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(sigmoid(x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return mean(mul(x, x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return mse(x, y); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return mean_abs_diff(x, y); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return mean_sample_norm(x); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return total_variation(x); }, x).max_relative_error < kTol);
}

TEST_CASE("channel, pooling and gram ops") {
  std::mt19937_64 rng(2);
  Var<double> x = leaf(Shape{2, 3, 4, 4}, rng);
  const Var<double> other = constant(random_tensor<double>(Shape{2, 2, 4, 4}, rng));
  CHECK(check_gradient([&] { return project(concat_channels<double>({other, x})); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(slice_channels(x, 1, 2)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(avg_pool2(x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(global_avg_pool(x)); }, x).max_relative_error < kTol);
  CHECK(check_gradient([&] { return project(gram(x)); }, x).max_relative_error < kTol);
}

TEST_CASE("compositing") {
  std::mt19937_64 rng(3);
  Var<double> colour = leaf(Shape{2, 3, 4, 4}, rng);
  Var<double> mask = leaf(Shape{2, 1, 4, 4}, rng, 0.0, 1.0);
  Var<double> image = leaf(Shape{2, 3, 4, 4}, rng);
  auto f = [&] { return project(composite(colour, mask, image)); };
  CHECK(check_gradient(f, colour).max_relative_error < kTol);
  CHECK(check_gradient(f, mask).max_relative_error < kTol);
  CHECK(check_gradient(f, image).max_relative_error < kTol);
}

TEST_CASE("convolution, linear and normalisation") {
  std::mt19937_64 rng(4);
  Var<double> x = leaf(Shape{2, 3, 6, 6}, rng);
  Var<double> w = leaf(Shape{4, 3, 3, 3}, rng);
  Var<double> b = leaf(Shape{1, 4, 1, 1}, rng);
  for (const Conv2dGeometry g : {Conv2dGeometry{3, 1, 1}, Conv2dGeometry{3, 2, 1}, Conv2dGeometry{3, 1, 0}}) {
    auto f = [&] { return project(conv2d(x, w, b, g)); };
    CHECK(check_gradient(f, x).max_relative_error < kTol);
    CHECK(check_gradient(f, w).max_relative_error < kTol);
    CHECK(check_gradient(f, b).max_relative_error < kTol);
  }

  Var<double> tw = leaf(Shape{3, 2, 3, 3}, rng);  // (in, out, k, k)
  Var<double> tb = leaf(Shape{1, 2, 1, 1}, rng);
  const Conv2dGeometry up{3, 2, 1};
  auto ft = [&] { return project(conv_transpose2d(x, tw, tb, up)); };
  CHECK(check_gradient(ft, x).max_relative_error < kTol);
  CHECK(check_gradient(ft, tw).max_relative_error < kTol);
  CHECK(check_gradient(ft, tb).max_relative_error < kTol);

  Var<double> lw = leaf(Shape{5, 3 * 6 * 6, 1, 1}, rng);
  Var<double> lb = leaf(Shape{1, 5, 1, 1}, rng);
  auto fl = [&] { return project(linear(x, lw, lb)); };
  CHECK(check_gradient(fl, x).max_relative_error < kTol);
  CHECK(check_gradient(fl, lw, sample_indices(lw.value().size(), 40, rng)).max_relative_error < kTol);
  CHECK(check_gradient(fl, lb).max_relative_error < kTol);

  Var<double> gamma = leaf(Shape{1, 3, 1, 1}, rng, 0.5, 1.5);
  Var<double> beta = leaf(Shape{1, 3, 1, 1}, rng);
  auto fn = [&] { return project(instance_norm(x, gamma, beta)); };
  CHECK(check_gradient(fn, x).max_relative_error < kTol);
  CHECK(check_gradient(fn, gamma).max_relative_error < kTol);
  CHECK(check_gradient(fn, beta).max_relative_error < kTol);
}

TEST_CASE("reused nodes accumulate gradient") {
  std::mt19937_64 rng(5);
  Var<double> x = leaf(Shape{1, 2, 2, 2}, rng);
  const Var<double> t = tanh(x);
  auto f = [&] {
    const Var<double> u = tanh(x);
    return sum(add(mul(u, u), u));
  };
  CHECK(check_gradient(f, x).max_relative_error < kTol);
  CHECK(t.value().size() == 8);
}

TEST_CASE("no-grad guard builds no graph") {
  std::mt19937_64 rng(6);
  Var<double> x = leaf(Shape{1, 1, 2, 2}, rng);
  {
    NoGradGuard guard;
    const Var<double> y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(mul(x, x).requires_grad());
  CHECK_FALSE(detach(x).requires_grad());
}

TEST_CASE("loss gradients by central differences") {
  std::mt19937_64 rng(7);
  const Shape s{2, 3, 8, 8};
  Var<double> gen = leaf(s, rng);
  const Var<double> tgt = constant(random_tensor<double>(s, rng));
  CHECK(check_gradient([&] { return pixel_loss(gen, tgt); }, gen).max_relative_error < kTol);
  CHECK(check_gradient([&] { return tv_loss(gen); }, gen).max_relative_error < kTol);

  Var<double> scores_real = leaf(Shape{4, 1, 1, 1}, rng, -0.8, 0.8);
  Var<double> scores_fake = leaf(Shape{4, 1, 1, 1}, rng, -0.8, 0.8);
  auto hd = [&] { return hinge_discriminator_loss(scores_real, scores_fake); };
  CHECK(check_gradient(hd, scores_real).max_relative_error < kTol);
  CHECK(check_gradient(hd, scores_fake).max_relative_error < kTol);
  CHECK(check_gradient([&] { return hinge_generator_loss(scores_fake); }, scores_fake).max_relative_error < kTol);

  RandomConvExtractorConfig ec;
  ec.base_width = 4;
  const RandomConvExtractor<double> ext(ec);
  CHECK(check_gradient([&] { return perceptual_loss<double>(ext, gen, tgt).feature; }, gen,
                       sample_indices(gen.value().size(), 60, rng))
            .max_relative_error < kTol);
  CHECK(check_gradient([&] { return perceptual_loss<double>(ext, gen, tgt).style; }, gen,
                       sample_indices(gen.value().size(), 60, rng))
            .max_relative_error < kTol);
}

TEST_CASE("cycle and recurrent cycle gradients through a tiny generator") {
  std::mt19937_64 rng(8);
  const Generator<double> g(tiny_generator(2));
  const Translator<double> t = g.translator();
  Var<double> img = leaf(Shape{2, 3, 8, 8}, rng);
  const Var<double> ht = constant(random_tensor<double>(Shape{2, 2, 8, 8}, rng, 0, 1));
  const Var<double> hn = constant(random_tensor<double>(Shape{2, 2, 8, 8}, rng, 0, 1));
  const Var<double> hi = constant(random_tensor<double>(Shape{2, 2, 8, 8}, rng, 0, 1));

  auto cyc = [&] { return cycle_loss(t, img, ht, hi); };
  auto rec = [&] { return recurrent_cycle_loss(t, img, ht, hn); };
  CHECK(check_gradient(cyc, img, sample_indices(img.value().size(), 40, rng)).max_relative_error < kTol);
  CHECK(check_gradient(rec, img, sample_indices(img.value().size(), 40, rng)).max_relative_error < kTol);

  int checked = 0;
  for (const auto& p : g.parameters()) {
    if (p.name.find("weight") == std::string::npos) continue;
    Var<double> w = p.var;
    const auto idx = sample_indices(w.value().size(), 6, rng);
    const double c = check_gradient(cyc, w, idx).max_relative_error;
    const double r = check_gradient(rec, w, idx).max_relative_error;
    CAPTURE(p.name);
    CHECK(c < kTol);
    CHECK(r < kTol);
    ++checked;
  }
  CHECK(checked >= 5);
}

}  // TEST_SUITE
