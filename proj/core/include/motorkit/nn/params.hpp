#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "motorkit/common.hpp"
#include "motorkit/nn/tape.hpp"

namespace motorkit::nn {

// Named, disjoint index ranges into one flat parameter array.
class ParamLayout {
 public:
  struct Slice {
    std::string name;
    int offset = 0;
    int size = 0;
  };

  // Appends a slice and returns its offset.
  int add(const std::string& name, int size);

  const Slice& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  int total() const { return total_; }
  const std::vector<Slice>& slices() const { return slices_; }

 private:
  std::vector<Slice> slices_;
  std::map<std::string, int> index_;
  int total_ = 0;
};

using ParamLayoutPtr = std::shared_ptr<const ParamLayout>;

// Flat parameter (or gradient) array plus its shared layout.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(ParamLayoutPtr layout)
      : layout_(std::move(layout)), values_(VecX::Zero(layout_->total())) {}

  const ParamLayout& layout() const { return *layout_; }
  ParamLayoutPtr layout_ptr() const { return layout_; }
  VecX& values() { return values_; }
  const VecX& values() const { return values_; }
  int size() const { return int(values_.size()); }

  Eigen::Ref<VecX> slice(const std::string& name) {
    const auto& s = layout_->find(name);
    return values_.segment(s.offset, s.size);
  }
  Eigen::Ref<const VecX> slice(const std::string& name) const {
    const auto& s = layout_->find(name);
    return values_.segment(s.offset, s.size);
  }
  // Column-major matrix view of a slice.
  Eigen::Map<const MatX> matrix(const std::string& name, int rows, int cols) const;

  void set_zero() { values_.setZero(); }

 private:
  ParamLayoutPtr layout_;
  VecX values_;
};

// Bridges a ParamVector into a Tape: hands out leaf nodes per named slice
// (cached, so repeated use of the same slice accumulates onto one leaf) and
// scatters leaf gradients back into a flat gradient vector.
class TapedParams {
 public:
  TapedParams(Tape& tape, const ParamVector& params)
      : tape_(&tape), params_(&params) {}

  Tape::NodeId matrix(const std::string& name, int rows, int cols);
  Tape::NodeId vector(const std::string& name);

  // Adds d(loss)/d(slice) for every slice handed out into `grad` (which must
  // share the params' layout). Call after tape.backward().
  void add_grad_into(ParamVector& grad) const;

 private:
  struct Entry {
    Tape::NodeId node;
    int rows, cols;
  };
  Tape* tape_;
  const ParamVector* params_;
  std::map<std::string, Entry> entries_;
};

}  // namespace motorkit::nn
