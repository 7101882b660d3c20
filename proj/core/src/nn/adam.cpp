#include "biastransfer/nn/adam.hpp"

#include <cmath>

namespace bt::nn {

Adam::Adam(ParameterRefs params, AdamOptions options)
    : params_(std::move(params)), options_(options) {}

void Adam::step() {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const auto step_size = static_cast<float>(options_.lr / corr1);
  const auto inv_sqrt_corr2 = static_cast<float>(1.0 / std::sqrt(corr2));
  const auto eps = static_cast<float>(options_.eps);
  const auto fb1 = static_cast<float>(b1);
  const auto fb2 = static_cast<float>(b2);
  for (auto* p : params_) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const float g = p->grad[i];
      p->adam_m[i] = fb1 * p->adam_m[i] + (1.0f - fb1) * g;
      p->adam_v[i] = fb2 * p->adam_v[i] + (1.0f - fb2) * g * g;
      p->value[i] -= step_size * p->adam_m[i] / (std::sqrt(p->adam_v[i]) * inv_sqrt_corr2 + eps);
    }
  }
}

}  // namespace bt::nn
