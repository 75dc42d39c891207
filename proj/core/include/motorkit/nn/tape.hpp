#pragma once

#include <functional>
#include <vector>

#include "motorkit/common.hpp"

namespace motorkit::nn {

// Reverse-mode automatic differentiation over dense matrices.
//
// Node values are (rows x cols) matrices; batched activations put one sample
// per column. Each op records a closure that pulls the gradient of its output
// into its parents; backward() replays the tape in reverse. Nodes whose
// parents are all constants record no closure, so inference-only subgraphs
// cost nothing extra on the backward pass.
class Tape {
 public:
  using NodeId = int;

  // Leaf with gradient tracking (parameters, differentiable inputs).
  NodeId leaf(MatX value);
  // Leaf without gradient tracking.
  NodeId constant(MatX value);
  NodeId constant_scalar(real value);

  // ----- elementwise ----- //
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, real c);
  NodeId add_scalar(NodeId a, real c);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);

  // ----- broadcasting (b is a single column / row) ----- //
  NodeId add_col(NodeId a, NodeId b);  // (m x n) + (m x 1)
  NodeId sub_col(NodeId a, NodeId b);  // (m x n) - (m x 1)
  NodeId mul_col(NodeId a, NodeId b);  // (m x n) * (m x 1)
  NodeId mul_row(NodeId a, NodeId b);  // (m x n) * (1 x n)
  NodeId tile_cols(NodeId a, int n);   // (m x 1) -> (m x n)

  // ----- linear algebra / structure ----- //
  NodeId matmul(NodeId a, NodeId b);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId slice_rows(NodeId a, int row0, int nrows);
  NodeId sum(NodeId a);      // -> 1x1
  NodeId mean(NodeId a);     // -> 1x1
  NodeId col_sum(NodeId a);  // (m x n) -> (1 x n), sum over rows
  NodeId row_sum(NodeId a);  // (m x n) -> (m x 1), sum over cols

  // Value pass-through that blocks gradient flow.
  NodeId stop_gradient(NodeId a);

  // Runs the reverse sweep from a scalar (1x1) loss node.
  void backward(NodeId loss);

  const MatX& value(NodeId id) const { return nodes_[id].value; }
  real scalar(NodeId id) const;
  // Gradient accumulated into `id` by the last backward(); zero matrix if the
  // node was never reached.
  MatX grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  int size() const { return int(nodes_.size()); }

 private:
  struct Node {
    MatX value;
    MatX grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  NodeId push(MatX value, bool requires_grad);
  void accum(NodeId id, const MatX& g);
  void check_same_shape(NodeId a, NodeId b, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace motorkit::nn
