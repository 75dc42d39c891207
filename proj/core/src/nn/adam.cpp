#include "motorkit/nn/adam.hpp"

#include <cmath>

namespace motorkit::nn {

void Adam::step(VecX& params, const VecX& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("adam: size mismatch");
  if (!grad.allFinite()) throw NumericError("adam: non-finite gradient");
  ++t_;
  m_ = cfg_.beta1 * m_ + (real(1) - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (real(1) - cfg_.beta2) * grad.cwiseProduct(grad);
  const real bc1 = real(1) - real(std::pow(double(cfg_.beta1), t_));
  const real bc2 = real(1) - real(std::pow(double(cfg_.beta2), t_));
  params.array() -= cfg_.lr * (m_.array() / bc1) /
                    ((v_.array() / bc2).sqrt() + cfg_.eps);
}

}  // namespace motorkit::nn
