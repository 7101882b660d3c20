#pragma once

#include <cstdint>

#include "biastransfer/nn/tensor.hpp"

namespace bt::nn {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction; moments live in the Parameter objects.
class Adam {
 public:
  Adam(ParameterRefs params, AdamOptions options);

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  void zero_grad() { nn::zero_grad(params_); }
  void step();
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  ParameterRefs params_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

}  // namespace bt::nn
