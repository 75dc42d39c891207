#pragma once

#include "motorkit/common.hpp"
#include "motorkit/nn/params.hpp"

namespace motorkit::nn {

struct AdamConfig {
  real lr = real(1e-3);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real eps = real(1e-8);
};

class Adam {
 public:
  Adam() = default;
  Adam(int n, AdamConfig cfg)
      : cfg_(cfg), m_(VecX::Zero(n)), v_(VecX::Zero(n)) {}

  void step(VecX& params, const VecX& grad);
  void step(ParamVector& params, const ParamVector& grad) {
    step(params.values(), grad.values());
  }
  void set_lr(real lr) { cfg_.lr = lr; }
  real lr() const { return cfg_.lr; }
  int t() const { return t_; }

 private:
  AdamConfig cfg_;
  VecX m_, v_;
  int t_ = 0;
};

}  // namespace motorkit::nn
