#include "gannotation/losses.hpp"

#include "gannotation/error.hpp"

#include <cmath>
#include <utility>

namespace gannotation {

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {{"lambda_adv", adv}, {"lambda_pix", pix}, {"lambda_cyc", cyc},
                                                {"lambda_rec", rec}, {"lambda_pp", pp},   {"lambda_tv", tv}};
  for (const auto& [name, v] : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be a finite value >= 0");
  }
}

LossReport total_generator_loss(const LossTerms& t, const LossWeights& w) {
  w.validate();
  const std::pair<const char*, double> all[] = {{"adv", t.adv}, {"pix", t.pix},           {"cyc", t.cyc}, {"rec", t.rec},
                                                {"pp_feature", t.pp_feature}, {"pp_style", t.pp_style}, {"tv", t.tv}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v)) throw invalid_state_error(std::string("non-finite loss term '") + name + "'");
  }
  LossReport r;
  r.terms = t;
  r.total = w.adv * t.adv + w.pix * t.pix + w.cyc * t.cyc + w.rec * t.rec + w.pp * (t.pp_feature + t.pp_style) +
            w.tv * t.tv;
  return r;
}

double recompute_total(const LossReport& report, const LossWeights& w) {
  return total_generator_loss(report.terms, w).total;
}

}  // namespace gannotation
