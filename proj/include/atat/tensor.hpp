#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <sstream>
#include <utility>
#include <vector>

#include "atat/common.hpp"

namespace atat {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

inline Index shape_count(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Dense n-d array over a flat row-major Eigen buffer. Matrix views for the
// GEMM-shaped ops come from mat()/Map, so Eigen stays the only math backend.
template <class S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(ArrX<S>::Zero(shape_count(shape_))) {}

  Tensor(Shape shape, ArrX<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_count(shape_), Errc::ShapeError,
            "tensor data length " + std::to_string(data_.size()) + " != " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, S v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor from(Shape shape, std::initializer_list<S> vals) {
    Tensor t(std::move(shape));
    require(static_cast<Index>(vals.size()) == t.size(), Errc::ShapeError, "initializer size");
    Index i = 0;
    for (S v : vals) t.data_[i++] = v;
    return t;
  }

  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t.data_[i] = static_cast<S>(rng.uniform(lo, hi));
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<size_t>(i)]; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  ArrX<S>& array() { return data_; }
  const ArrX<S>& array() const { return data_; }

  S& operator[](Index i) { return data_[i]; }
  S operator[](Index i) const { return data_[i]; }

  Eigen::Map<MatX<S>> mat(Index rows, Index cols) {
    require(rows * cols == size(), Errc::ShapeError, "mat view size mismatch");
    return Eigen::Map<MatX<S>>(data_.data(), rows, cols);
  }
  Eigen::Map<const MatX<S>> mat(Index rows, Index cols) const {
    require(rows * cols == size(), Errc::ShapeError, "mat view size mismatch");
    return Eigen::Map<const MatX<S>>(data_.data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const {
    require(shape_count(shape) == size(), Errc::ShapeError,
            "reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  template <class S2>
  Tensor<S2> cast() const {
    Tensor<S2> out(shape_);
    out.array() = data_.template cast<S2>();
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Shape shape_;
  ArrX<S> data_;
};

}  // namespace atat
