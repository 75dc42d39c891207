#include "motorkit/nn/params.hpp"

namespace motorkit::nn {

int ParamLayout::add(const std::string& name, int size) {
  if (size <= 0) throw ConfigError("param layout: non-positive slice size for " + name);
  if (index_.count(name)) throw ConfigError("param layout: duplicate slice " + name);
  const int offset = total_;
  index_[name] = int(slices_.size());
  slices_.push_back({name, offset, size});
  total_ += size;
  return offset;
}

const ParamLayout::Slice& ParamLayout::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("param layout: unknown slice " + name);
  return slices_[it->second];
}

bool ParamLayout::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Eigen::Map<const MatX> ParamVector::matrix(const std::string& name, int rows,
                                           int cols) const {
  const auto& s = layout_->find(name);
  if (s.size != rows * cols)
    throw ConfigError("param slice " + name + " has size " + std::to_string(s.size) +
                      ", expected " + std::to_string(rows * cols));
  return Eigen::Map<const MatX>(values_.data() + s.offset, rows, cols);
}

Tape::NodeId TapedParams::matrix(const std::string& name, int rows, int cols) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (it->second.rows != rows || it->second.cols != cols)
      throw ConfigError("taped params: slice " + name + " requested with two shapes");
    return it->second.node;
  }
  Tape::NodeId node = tape_->leaf(params_->matrix(name, rows, cols));
  entries_[name] = {node, rows, cols};
  return node;
}

Tape::NodeId TapedParams::vector(const std::string& name) {
  const auto& s = params_->layout().find(name);
  return matrix(name, s.size, 1);
}

void TapedParams::add_grad_into(ParamVector& grad) const {
  for (const auto& [name, e] : entries_) {
    const MatX g = tape_->grad(e.node);
    grad.slice(name) += Eigen::Map<const VecX>(g.data(), g.size());
  }
}

}  // namespace motorkit::nn
