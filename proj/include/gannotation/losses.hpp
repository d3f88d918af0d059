#pragma once

#include "gannotation/conditioning.hpp"
#include "gannotation/error.hpp"
#include "gannotation/networks.hpp"

#include <string>
#include <vector>

namespace gannotation {

struct LossWeights {
  double adv = 1.0;
  double pix = 10.0;
  double cyc = 100.0;
  double rec = 100.0;
  double pp = 10.0;
  double tv = 1e-4;

  void validate() const;
};

/// Unweighted generator-side terms.
struct LossTerms {
  double adv = 0.0;
  double pix = 0.0;
  double cyc = 0.0;
  double rec = 0.0;
  double pp_feature = 0.0;
  double pp_style = 0.0;
  double tv = 0.0;
};

struct LossReport {
  LossTerms terms;
  double total = 0.0;
  double adv_d = 0.0;  // discriminator hinge loss of the same step
};

/// Weighted sum of the generator terms; non-finite terms raise invalid_state_error naming the term.
LossReport total_generator_loss(const LossTerms& terms, const LossWeights& w);

/// Recomputes the weighted total from a report's terms.
double recompute_total(const LossReport& report, const LossWeights& w);

template <typename T>
Var<T> hinge_discriminator_loss(const Var<T>& real_scores, const Var<T>& fake_scores) {
  if (real_scores.value().size() == 0 || fake_scores.value().size() == 0) {
    throw std::invalid_argument("hinge_discriminator_loss: empty score set");
  }
  return add(mean(relu(add_scalar(scale(real_scores, T(-1)), T(1)))), mean(relu(add_scalar(fake_scores, T(1)))));
}

template <typename T>
Var<T> hinge_generator_loss(const Var<T>& fake_scores) {
  if (fake_scores.value().size() == 0) throw std::invalid_argument("hinge_generator_loss: empty score set");
  return scale(mean(fake_scores), T(-1));
}

template <typename T>
Var<T> pixel_loss(const Var<T>& generated, const Var<T>& target) {
  return mse(generated, target);
}

/// || G(G(I; H_t); H_i) - I ||^2, element mean.
template <typename T>
Var<T> cycle_loss(const Translator<T>& g, const Var<T>& image, const Var<T>& target_condition,
                  const Var<T>& source_condition) {
  return mse(g(g(image, target_condition), source_condition), image);
}

template <typename T>
Var<T> cycle_loss(const Translator<T>& g, const Var<T>& image, const std::vector<LandmarkSet>& target_shapes,
                  const std::vector<LandmarkSet>& source_shapes, const ConditionEncoder<T>& encoder) {
  return cycle_loss(g, image, constant(encoder(target_shapes)), constant(encoder(source_shapes)));
}

/// || G(G(I; H_t); H_n) - G(I; H_n) ||^2, element mean. Both branches carry gradient.
template <typename T>
Var<T> recurrent_cycle_loss(const Translator<T>& g, const Var<T>& image, const Var<T>& target_condition,
                            const Var<T>& second_condition) {
  return mse(g(g(image, target_condition), second_condition), g(image, second_condition));
}

template <typename T>
Var<T> recurrent_cycle_loss(const Translator<T>& g, const Var<T>& image, const std::vector<LandmarkSet>& target_shapes,
                            const std::vector<LandmarkSet>& second_shapes, const ConditionEncoder<T>& encoder) {
  return recurrent_cycle_loss(g, image, constant(encoder(target_shapes)), constant(encoder(second_shapes)));
}

struct PerceptualConfig {
  std::vector<std::string> feature_tags{"relu1", "relu2", "relu3", "relu4"};
  std::string style_tag = "relu3";
};

template <typename T>
struct PerceptualTerms {
  Var<T> feature;
  Var<T> style;
};

/// Feature term: sum over tags of the mean absolute activation difference.
/// Style term: batch mean of || Gram(gen) - Gram(target) ||_F at the style tag.
template <typename T>
PerceptualTerms<T> perceptual_loss(const FeatureExtractor<T>& extractor, const Var<T>& generated, const Var<T>& target,
                                   const PerceptualConfig& cfg = {}) {
  const auto available = extractor.tags();
  auto check = [&](const std::string& t) {
    if (std::find(available.begin(), available.end(), t) == available.end()) {
      throw std::invalid_argument("perceptual_loss: extractor does not expose tag '" + t + "'");
    }
  };
  for (const auto& t : cfg.feature_tags) check(t);
  check(cfg.style_tag);
  if (cfg.feature_tags.empty()) throw std::invalid_argument("perceptual_loss: no feature tags");

  std::vector<std::string> tags = cfg.feature_tags;
  tags.push_back(cfg.style_tag);
  const auto gen = extractor.extract(generated, tags);
  const auto tgt = extractor.extract(target, tags);
  PerceptualTerms<T> out;
  out.feature = mean_abs_diff(gen[0], tgt[0]);
  for (std::size_t i = 1; i < cfg.feature_tags.size(); ++i) out.feature = add(out.feature, mean_abs_diff(gen[i], tgt[i]));
  out.style = mean_sample_norm(sub(gram(gen.back()), gram(tgt.back())));
  return out;
}

template <typename T>
Var<T> tv_loss(const Var<T>& image) {
  return total_variation(image);
}

}  // namespace gannotation
