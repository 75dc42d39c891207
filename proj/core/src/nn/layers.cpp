#include "motorkit/nn/layers.hpp"

#include <cmath>

namespace motorkit::nn {

namespace {
constexpr real kHalfLog2Pi = real(0.9189385332046727);  // 0.5*ln(2*pi)

MatX activate(const MatX& x, Activation a) {
  switch (a) {
    case Activation::kRelu: return x.cwiseMax(real(0));
    case Activation::kTanh: return x.array().tanh();
    case Activation::kIdentity: return x;
  }
  throw ConfigError("unknown activation");
}
}  // namespace

void init_linear(Eigen::Ref<VecX> weights, Eigen::Ref<VecX> bias, int fan_in,
                 Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (int i = 0; i < weights.size(); ++i)
    weights[i] = real(rng.uniform(-bound, bound));
  bias.setZero();
}

// ----- Mlp ----- //

Mlp::Mlp(std::string name, std::vector<int> widths, Activation hidden)
    : name_(std::move(name)), widths_(std::move(widths)), hidden_(hidden) {
  if (widths_.size() < 2) throw ConfigError("mlp " + name_ + ": needs >= 2 widths");
  for (int w : widths_)
    if (w <= 0) throw ConfigError("mlp " + name_ + ": non-positive width");
}

void Mlp::register_params(ParamLayout& layout) const {
  for (size_t i = 0; i + 1 < widths_.size(); ++i) {
    layout.add(name_ + "/W" + std::to_string(i), widths_[i + 1] * widths_[i]);
    layout.add(name_ + "/b" + std::to_string(i), widths_[i + 1]);
  }
}

void Mlp::init_params(ParamVector& params, Rng& rng) const {
  for (size_t i = 0; i + 1 < widths_.size(); ++i) {
    init_linear(params.slice(name_ + "/W" + std::to_string(i)),
                params.slice(name_ + "/b" + std::to_string(i)), widths_[i], rng);
  }
}

MatX Mlp::apply_batch(const ParamVector& params, const MatX& input) const {
  if (input.rows() != widths_.front())
    throw ConfigError("mlp " + name_ + ": input dim " + std::to_string(input.rows()) +
                      ", expected " + std::to_string(widths_.front()));
  MatX h = input;
  for (size_t i = 0; i + 1 < widths_.size(); ++i) {
    const auto W = params.matrix(name_ + "/W" + std::to_string(i), widths_[i + 1], widths_[i]);
    const auto b = params.slice(name_ + "/b" + std::to_string(i));
    MatX z = (W * h).colwise() + VecX(b);
    h = (i + 2 < widths_.size()) ? activate(z, hidden_) : std::move(z);
  }
  return h;
}

VecX Mlp::apply(const ParamVector& params, const VecX& input) const {
  return apply_batch(params, input).col(0);
}

Tape::NodeId Mlp::apply(Tape& tape, TapedParams& params, Tape::NodeId input) const {
  if (tape.value(input).rows() != widths_.front())
    throw ConfigError("mlp " + name_ + ": taped input dimension mismatch");
  Tape::NodeId h = input;
  for (size_t i = 0; i + 1 < widths_.size(); ++i) {
    const auto W = params.matrix(name_ + "/W" + std::to_string(i), widths_[i + 1], widths_[i]);
    const auto b = params.vector(name_ + "/b" + std::to_string(i));
    Tape::NodeId z = tape.add_col(tape.matmul(W, h), b);
    if (i + 2 < widths_.size()) {
      switch (hidden_) {
        case Activation::kRelu: z = tape.relu(z); break;
        case Activation::kTanh: z = tape.tanh(z); break;
        case Activation::kIdentity: break;
      }
    }
    h = z;
  }
  return h;
}

// ----- Lstm ----- //

Lstm::Lstm(std::string name, int input_dim, int width)
    : name_(std::move(name)), input_dim_(input_dim), width_(width) {
  if (input_dim <= 0 || width <= 0)
    throw ConfigError("lstm " + name_ + ": non-positive dimensions");
}

void Lstm::register_params(ParamLayout& layout) const {
  layout.add(name_ + "/Wx", 4 * width_ * input_dim_);
  layout.add(name_ + "/Wh", 4 * width_ * width_);
  layout.add(name_ + "/b", 4 * width_);
}

void Lstm::init_params(ParamVector& params, Rng& rng) const {
  // Bias layout matches the gate row order below: [input, forget, cand, out].
  const double bx = 1.0 / std::sqrt(double(input_dim_));
  const double bh = 1.0 / std::sqrt(double(width_));
  auto wx = params.slice(name_ + "/Wx");
  auto wh = params.slice(name_ + "/Wh");
  for (int i = 0; i < wx.size(); ++i) wx[i] = real(rng.uniform(-bx, bx));
  for (int i = 0; i < wh.size(); ++i) wh[i] = real(rng.uniform(-bh, bh));
  auto b = params.slice(name_ + "/b");
  b.setZero();
  b.segment(width_, width_).setConstant(real(1));  // forget gate
}

RecurrentState Lstm::zero_state() const {
  return {VecX::Zero(width_), VecX::Zero(width_)};
}
RecurrentStateBatch Lstm::zero_state(int batch) const {
  return {MatX::Zero(width_, batch), MatX::Zero(width_, batch)};
}

RecurrentStateBatch Lstm::step_batch(const ParamVector& params,
                                     const RecurrentStateBatch& state,
                                     const MatX& input) const {
  if (input.rows() != input_dim_ || state.hidden.rows() != width_ ||
      state.cell.rows() != width_)
    throw ConfigError("lstm " + name_ + ": step dimension mismatch");
  const auto Wx = params.matrix(name_ + "/Wx", 4 * width_, input_dim_);
  const auto Wh = params.matrix(name_ + "/Wh", 4 * width_, width_);
  const auto b = params.slice(name_ + "/b");
  MatX z = (Wx * input + Wh * state.hidden).colwise() + VecX(b);
  const auto gate_i = z.middleRows(0, width_).array();
  const auto gate_f = z.middleRows(width_, width_).array();
  const auto cand = z.middleRows(2 * width_, width_).array();
  const auto gate_o = z.middleRows(3 * width_, width_).array();
  auto sig = [](const auto& x) { return ((-x).exp() + real(1)).inverse(); };
  RecurrentStateBatch out;
  out.cell = sig(gate_f) * state.cell.array() + sig(gate_i) * cand.tanh();
  out.hidden = sig(gate_o) * out.cell.array().tanh();
  return out;
}

RecurrentState Lstm::step(const ParamVector& params, const RecurrentState& state,
                          const VecX& input) const {
  RecurrentStateBatch s{state.hidden, state.cell};
  RecurrentStateBatch next = step_batch(params, s, input);
  return {next.hidden.col(0), next.cell.col(0)};
}

Lstm::TapedState Lstm::zero_state(Tape& tape, int batch) const {
  return {tape.constant(MatX::Zero(width_, batch)),
          tape.constant(MatX::Zero(width_, batch))};
}

Lstm::TapedState Lstm::step(Tape& tape, TapedParams& params,
                            const TapedState& state, Tape::NodeId input) const {
  const auto Wx = params.matrix(name_ + "/Wx", 4 * width_, input_dim_);
  const auto Wh = params.matrix(name_ + "/Wh", 4 * width_, width_);
  const auto b = params.vector(name_ + "/b");
  Tape::NodeId z = tape.add_col(
      tape.add(tape.matmul(Wx, input), tape.matmul(Wh, state.hidden)), b);
  Tape::NodeId gate_i = tape.sigmoid(tape.slice_rows(z, 0, width_));
  Tape::NodeId gate_f = tape.sigmoid(tape.slice_rows(z, width_, width_));
  Tape::NodeId cand = tape.tanh(tape.slice_rows(z, 2 * width_, width_));
  Tape::NodeId gate_o = tape.sigmoid(tape.slice_rows(z, 3 * width_, width_));
  TapedState out;
  out.cell = tape.add(tape.mul(gate_f, state.cell), tape.mul(gate_i, cand));
  out.hidden = tape.mul(gate_o, tape.tanh(out.cell));
  return out;
}

// ----- Gaussian heads ----- //

real gaussian_log_prob(const GaussianHead& head, const VecX& x) {
  if (head.mean.size() != head.log_std.size() || x.size() != head.mean.size())
    throw ConfigError("gaussian_log_prob: dimension mismatch");
  if (!all_finite(head.mean) || !all_finite(head.log_std) || !all_finite(x))
    throw NumericError("gaussian_log_prob: non-finite input");
  const VecX z = (x - head.mean).cwiseProduct((-head.log_std).array().exp().matrix());
  return -real(x.size()) * kHalfLog2Pi - head.log_std.sum() - real(0.5) * z.squaredNorm();
}

VecX gaussian_sample(const GaussianHead& head, Rng& rng) {
  VecX eps = rng.gaussian_vec(int(head.mean.size()));
  return head.mean + head.log_std.array().exp().matrix().cwiseProduct(eps);
}

real gaussian_entropy(const GaussianHead& head) {
  // 0.5*ln(2*pi*e) per dimension plus the log stddevs.
  return real(head.mean.size()) * (kHalfLog2Pi + real(0.5)) + head.log_std.sum();
}

real gaussian_kl(const GaussianHead& p, const GaussianHead& q) {
  if (p.mean.size() != q.mean.size())
    throw ConfigError("gaussian_kl: dimension mismatch");
  const VecX var_p = (real(2) * p.log_std).array().exp();
  const VecX var_q = (real(2) * q.log_std).array().exp();
  const VecX d = p.mean - q.mean;
  real kl = 0;
  for (int i = 0; i < p.mean.size(); ++i) {
    kl += q.log_std[i] - p.log_std[i] +
          (var_p[i] + d[i] * d[i]) / (real(2) * var_q[i]) - real(0.5);
  }
  return kl;
}

Tape::NodeId gaussian_log_prob(Tape& tape, Tape::NodeId mean, Tape::NodeId log_std,
                               Tape::NodeId x) {
  const int n = int(tape.value(mean).cols());
  const bool broadcast = tape.value(log_std).cols() == 1 && n > 1;
  Tape::NodeId diff = tape.sub(x, mean);
  Tape::NodeId inv_std = tape.exp(tape.neg(log_std));
  Tape::NodeId z = broadcast ? tape.mul_col(diff, inv_std) : tape.mul(diff, inv_std);
  Tape::NodeId quad = tape.scale(tape.col_sum(tape.square(z)), real(-0.5));
  Tape::NodeId log_std_sum = tape.col_sum(log_std);  // 1x1 or 1xn
  if (broadcast) log_std_sum = tape.tile_cols(log_std_sum, n);
  Tape::NodeId out = tape.sub(quad, log_std_sum);
  return tape.add_scalar(out, -real(tape.value(mean).rows()) * kHalfLog2Pi);
}

Tape::NodeId gaussian_kl(Tape& tape, Tape::NodeId mean_p, Tape::NodeId log_std_p,
                         Tape::NodeId mean_q, Tape::NodeId log_std_q) {
  // KL = sum_i [ log s_q - log s_p + (s_p^2 + (m_p - m_q)^2) / (2 s_q^2) - 1/2 ]
  const int n = int(tape.value(mean_p).cols());
  if (tape.value(log_std_p).cols() == 1 && n > 1)
    log_std_p = tape.tile_cols(log_std_p, n);
  if (tape.value(log_std_q).cols() == 1 && n > 1)
    log_std_q = tape.tile_cols(log_std_q, n);
  Tape::NodeId var_p = tape.exp(tape.scale(log_std_p, real(2)));
  Tape::NodeId inv_var_q = tape.exp(tape.scale(log_std_q, real(-2)));
  Tape::NodeId dmean2 = tape.square(tape.sub(mean_p, mean_q));
  Tape::NodeId quad =
      tape.scale(tape.mul(tape.add(var_p, dmean2), inv_var_q), real(0.5));
  Tape::NodeId dlog = tape.sub(log_std_q, log_std_p);
  Tape::NodeId per_dim = tape.add_scalar(tape.add(dlog, quad), real(-0.5));
  return tape.col_sum(per_dim);
}

}  // namespace motorkit::nn
