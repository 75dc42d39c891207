#include "motorkit/nn/tape.hpp"

#include <cmath>
#include <string>

namespace motorkit::nn {

namespace {
std::string shape_str(const MatX& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
}  // namespace

Tape::NodeId Tape::push(MatX value, bool requires_grad) {
  if (!value.allFinite()) throw NumericError("tape: non-finite value in graph");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return NodeId(nodes_.size()) - 1;
}

void Tape::accum(NodeId id, const MatX& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = MatX::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::check_same_shape(NodeId a, NodeId b, const char* op) const {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw ConfigError(std::string("tape: ") + op + " shape mismatch " +
                      shape_str(va) + " vs " + shape_str(vb));
  }
}

Tape::NodeId Tape::leaf(MatX value) { return push(std::move(value), true); }
Tape::NodeId Tape::constant(MatX value) { return push(std::move(value), false); }
Tape::NodeId Tape::constant_scalar(real value) {
  MatX m(1, 1);
  m(0, 0) = value;
  return push(std::move(m), false);
}

// ----- elementwise ----- //

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape(a, b, "add");
  NodeId id = push(nodes_[a].value + nodes_[b].value,
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      t.accum(a, t.nodes_[id].grad);
      t.accum(b, t.nodes_[id].grad);
    };
  }
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_shape(a, b, "sub");
  NodeId id = push(nodes_[a].value - nodes_[b].value,
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      t.accum(a, t.nodes_[id].grad);
      t.accum(b, -t.nodes_[id].grad);
    };
  }
  return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_shape(a, b, "mul");
  NodeId id = push(nodes_[a].value.cwiseProduct(nodes_[b].value),
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      t.accum(a, g.cwiseProduct(t.nodes_[b].value));
      t.accum(b, g.cwiseProduct(t.nodes_[a].value));
    };
  }
  return id;
}

Tape::NodeId Tape::div(NodeId a, NodeId b) {
  check_same_shape(a, b, "div");
  NodeId id = push(nodes_[a].value.cwiseQuotient(nodes_[b].value),
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      const MatX& vb = t.nodes_[b].value;
      t.accum(a, g.cwiseQuotient(vb));
      t.accum(b, -g.cwiseProduct(t.nodes_[id].value).cwiseQuotient(vb));
    };
  }
  return id;
}

Tape::NodeId Tape::neg(NodeId a) { return scale(a, real(-1)); }

Tape::NodeId Tape::scale(NodeId a, real c) {
  NodeId id = push(nodes_[a].value * c, nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, c, id](Tape& t) { t.accum(a, t.nodes_[id].grad * c); };
  }
  return id;
}

Tape::NodeId Tape::add_scalar(NodeId a, real c) {
  NodeId id = push(nodes_[a].value.array() + c, nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) { t.accum(a, t.nodes_[id].grad); };
  }
  return id;
}

Tape::NodeId Tape::tanh(NodeId a) {
  NodeId id = push(nodes_[a].value.array().tanh(), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX& y = t.nodes_[id].value;
      t.accum(a, t.nodes_[id].grad.cwiseProduct(
                     (MatX::Ones(y.rows(), y.cols()) - y.cwiseProduct(y))));
    };
  }
  return id;
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  MatX y = ((-nodes_[a].value.array()).exp() + real(1)).inverse();
  NodeId id = push(std::move(y), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX& y = t.nodes_[id].value;
      t.accum(a, t.nodes_[id].grad.cwiseProduct(
                     y.cwiseProduct(MatX::Ones(y.rows(), y.cols()) - y)));
    };
  }
  return id;
}

Tape::NodeId Tape::relu(NodeId a) {
  NodeId id = push(nodes_[a].value.cwiseMax(real(0)), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX mask =
          (t.nodes_[a].value.array() > real(0)).cast<real>().matrix();
      t.accum(a, t.nodes_[id].grad.cwiseProduct(mask));
    };
  }
  return id;
}

Tape::NodeId Tape::exp(NodeId a) {
  NodeId id = push(nodes_[a].value.array().exp(), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      t.accum(a, t.nodes_[id].grad.cwiseProduct(t.nodes_[id].value));
    };
  }
  return id;
}

Tape::NodeId Tape::log(NodeId a) {
  NodeId id = push(nodes_[a].value.array().log(), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      t.accum(a, t.nodes_[id].grad.cwiseQuotient(t.nodes_[a].value));
    };
  }
  return id;
}

Tape::NodeId Tape::square(NodeId a) {
  NodeId id = push(nodes_[a].value.cwiseProduct(nodes_[a].value),
                   nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      t.accum(a, real(2) * t.nodes_[id].grad.cwiseProduct(t.nodes_[a].value));
    };
  }
  return id;
}

// ----- broadcasting ----- //

Tape::NodeId Tape::add_col(NodeId a, NodeId b) {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (vb.cols() != 1 || vb.rows() != va.rows())
    throw ConfigError("tape: add_col needs (m x n) and (m x 1), got " +
                      shape_str(va) + " and " + shape_str(vb));
  NodeId id = push(va.colwise() + vb.col(0),
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      t.accum(a, g);
      t.accum(b, g.rowwise().sum());
    };
  }
  return id;
}

Tape::NodeId Tape::sub_col(NodeId a, NodeId b) { return add_col(a, neg(b)); }

Tape::NodeId Tape::mul_col(NodeId a, NodeId b) {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (vb.cols() != 1 || vb.rows() != va.rows())
    throw ConfigError("tape: mul_col needs (m x n) and (m x 1), got " +
                      shape_str(va) + " and " + shape_str(vb));
  NodeId id = push(va.array().colwise() * vb.col(0).array(),
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      const MatX& va = t.nodes_[a].value;
      const MatX& vb = t.nodes_[b].value;
      t.accum(a, g.array().colwise() * vb.col(0).array());
      t.accum(b, g.cwiseProduct(va).rowwise().sum());
    };
  }
  return id;
}

Tape::NodeId Tape::mul_row(NodeId a, NodeId b) {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (vb.rows() != 1 || vb.cols() != va.cols())
    throw ConfigError("tape: mul_row needs (m x n) and (1 x n), got " +
                      shape_str(va) + " and " + shape_str(vb));
  NodeId id = push(va.array().rowwise() * vb.row(0).array(),
                   nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      const MatX& va = t.nodes_[a].value;
      const MatX& vb = t.nodes_[b].value;
      t.accum(a, g.array().rowwise() * vb.row(0).array());
      t.accum(b, g.cwiseProduct(va).colwise().sum());
    };
  }
  return id;
}

Tape::NodeId Tape::tile_cols(NodeId a, int n) {
  if (nodes_[a].value.cols() != 1)
    throw ConfigError("tape: tile_cols needs an (m x 1) input");
  return matmul(a, constant(MatX::Ones(1, n)));
}

// ----- linear algebra / structure ----- //

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (va.cols() != vb.rows())
    throw ConfigError("tape: matmul inner dimension mismatch " + shape_str(va) +
                      " * " + shape_str(vb));
  NodeId id = push(va * vb, nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      t.accum(a, g * t.nodes_[b].value.transpose());
      t.accum(b, t.nodes_[a].value.transpose() * g);
    };
  }
  return id;
}

Tape::NodeId Tape::concat_rows(NodeId a, NodeId b) {
  const MatX& va = nodes_[a].value;
  const MatX& vb = nodes_[b].value;
  if (va.cols() != vb.cols())
    throw ConfigError("tape: concat_rows column mismatch " + shape_str(va) +
                      " vs " + shape_str(vb));
  MatX v(va.rows() + vb.rows(), va.cols());
  v.topRows(va.rows()) = va;
  v.bottomRows(vb.rows()) = vb;
  const int ra = int(va.rows()), rb = int(vb.rows());
  NodeId id = push(std::move(v), nodes_[a].requires_grad || nodes_[b].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, b, ra, rb, id](Tape& t) {
      const MatX& g = t.nodes_[id].grad;
      t.accum(a, g.topRows(ra));
      t.accum(b, g.bottomRows(rb));
    };
  }
  return id;
}

Tape::NodeId Tape::slice_rows(NodeId a, int row0, int nrows) {
  const MatX& va = nodes_[a].value;
  if (row0 < 0 || nrows < 0 || row0 + nrows > va.rows())
    throw ConfigError("tape: slice_rows range out of bounds");
  NodeId id = push(va.middleRows(row0, nrows), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, row0, nrows, id](Tape& t) {
      const MatX& va = t.nodes_[a].value;
      MatX g = MatX::Zero(va.rows(), va.cols());
      g.middleRows(row0, nrows) = t.nodes_[id].grad;
      t.accum(a, g);
    };
  }
  return id;
}

Tape::NodeId Tape::sum(NodeId a) {
  MatX v(1, 1);
  v(0, 0) = nodes_[a].value.sum();
  NodeId id = push(std::move(v), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX& va = t.nodes_[a].value;
      t.accum(a, MatX::Constant(va.rows(), va.cols(), t.nodes_[id].grad(0, 0)));
    };
  }
  return id;
}

Tape::NodeId Tape::mean(NodeId a) {
  return scale(sum(a), real(1) / real(nodes_[a].value.size()));
}

Tape::NodeId Tape::col_sum(NodeId a) {
  NodeId id = push(nodes_[a].value.colwise().sum(), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX& va = t.nodes_[a].value;
      const MatX& g = t.nodes_[id].grad;  // 1 x n
      t.accum(a, MatX::Ones(va.rows(), 1) * g);
    };
  }
  return id;
}

Tape::NodeId Tape::row_sum(NodeId a) {
  NodeId id = push(nodes_[a].value.rowwise().sum(), nodes_[a].requires_grad);
  if (nodes_[id].requires_grad) {
    nodes_[id].backward = [a, id](Tape& t) {
      const MatX& va = t.nodes_[a].value;
      const MatX& g = t.nodes_[id].grad;  // m x 1
      t.accum(a, g * MatX::Ones(1, va.cols()));
    };
  }
  return id;
}

Tape::NodeId Tape::stop_gradient(NodeId a) { return constant(nodes_[a].value); }

// ----- reverse sweep ----- //

void Tape::backward(NodeId loss) {
  if (nodes_[loss].value.rows() != 1 || nodes_[loss].value.cols() != 1)
    throw ConfigError("tape: backward() needs a 1x1 loss node");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss].requires_grad) return;  // loss disconnected from leaves
  nodes_[loss].grad = MatX::Ones(1, 1);
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backward && n.grad.size() != 0) n.backward(*this);
  }
}

real Tape::scalar(NodeId id) const {
  const MatX& v = nodes_[id].value;
  if (v.size() != 1) throw ConfigError("tape: scalar() on non-scalar node");
  return v(0, 0);
}

MatX Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) return MatX::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace motorkit::nn
