#pragma once

#include <string>
#include <vector>

#include "motorkit/common.hpp"
#include "motorkit/nn/params.hpp"
#include "motorkit/nn/tape.hpp"
#include "motorkit/rng.hpp"

namespace motorkit::nn {

enum class Activation { kRelu, kTanh, kIdentity };

// Fully connected stack: hidden activations between layers, identity output.
// Parameters live in the host ParamVector under "<name>/W<i>", "<name>/b<i>".
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, std::vector<int> widths,
      Activation hidden = Activation::kRelu);

  void register_params(ParamLayout& layout) const;
  void init_params(ParamVector& params, Rng& rng) const;

  VecX apply(const ParamVector& params, const VecX& input) const;
  MatX apply_batch(const ParamVector& params, const MatX& input) const;
  Tape::NodeId apply(Tape& tape, TapedParams& params, Tape::NodeId input) const;

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::vector<int> widths_;
  Activation hidden_ = Activation::kRelu;
};

struct RecurrentState {
  VecX hidden;
  VecX cell;
};
struct RecurrentStateBatch {
  MatX hidden;  // width x batch
  MatX cell;
};

// Four-gate LSTM cell (input / forget / candidate / output); tanh
// nonlinearities, forget-gate bias initialized to 1. Parameters:
// "<name>/Wx" (4h x in), "<name>/Wh" (4h x h), "<name>/b" (4h).
class Lstm {
 public:
  Lstm() = default;
  Lstm(std::string name, int input_dim, int width);

  void register_params(ParamLayout& layout) const;
  void init_params(ParamVector& params, Rng& rng) const;

  RecurrentState zero_state() const;
  RecurrentStateBatch zero_state(int batch) const;

  // Pure steps: the argument state is never mutated; the new hidden vector is
  // the cell's output.
  RecurrentState step(const ParamVector& params, const RecurrentState& state,
                      const VecX& input) const;
  RecurrentStateBatch step_batch(const ParamVector& params,
                                 const RecurrentStateBatch& state,
                                 const MatX& input) const;

  struct TapedState {
    Tape::NodeId hidden;
    Tape::NodeId cell;
  };
  TapedState zero_state(Tape& tape, int batch) const;
  TapedState step(Tape& tape, TapedParams& params, const TapedState& state,
                  Tape::NodeId input) const;

  int width() const { return width_; }
  int input_dim() const { return input_dim_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  int input_dim_ = 0;
  int width_ = 0;
};

// Diagonal Gaussian distribution instance.
struct GaussianHead {
  VecX mean;
  VecX log_std;
};

real gaussian_log_prob(const GaussianHead& head, const VecX& x);
VecX gaussian_sample(const GaussianHead& head, Rng& rng);
real gaussian_entropy(const GaussianHead& head);
// KL(p || q) for diagonal Gaussians.
real gaussian_kl(const GaussianHead& p, const GaussianHead& q);

// Taped variants. mean/log_std/x are (d x n) nodes ((d x 1) log_std is
// broadcast); each returns a (1 x n) row of per-sample values.
Tape::NodeId gaussian_log_prob(Tape& tape, Tape::NodeId mean, Tape::NodeId log_std,
                               Tape::NodeId x);
Tape::NodeId gaussian_kl(Tape& tape, Tape::NodeId mean_p, Tape::NodeId log_std_p,
                         Tape::NodeId mean_q, Tape::NodeId log_std_q);

// Uniform fan-in initialization bound: 1/sqrt(fan_in).
void init_linear(Eigen::Ref<VecX> weights, Eigen::Ref<VecX> bias, int fan_in,
                 Rng& rng);

inline constexpr real kLogStdInit = real(-0.6931471805599453);  // ln(0.5)

}  // namespace motorkit::nn
