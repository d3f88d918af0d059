#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gannotation {

using Index = Eigen::Index;

/// NCHW extent. Vectors are stored as (n, d, 1, 1), scalars as (1, 1, 1, 1).
struct Shape {
  Index n = 1;
  Index c = 1;
  Index h = 1;
  Index w = 1;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  Index sample() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense contiguous NCHW tensor backed by an Eigen array.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<T>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(const Shape& shape, T fill) : shape_(shape), data_(Array::Constant(shape.size(), fill)) {}
  Tensor(const Shape& shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw std::invalid_argument("tensor data does not match shape");
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  T operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }
  T& operator[](Index i) { return data_[i]; }
  T operator[](Index i) const { return data_[i]; }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + to_string(shape_));
    return data_[0];
  }

  /// One sample viewed as a (channels x pixels) row-major matrix.
  MatrixMap sample_matrix(Index n) { return MatrixMap(data() + n * shape_.sample(), shape_.c, shape_.plane()); }
  ConstMatrixMap sample_matrix(Index n) const {
    return ConstMatrixMap(data() + n * shape_.sample(), shape_.c, shape_.plane());
  }

  Tensor reshaped(const Shape& s) const {
    if (s.size() != shape_.size()) throw std::invalid_argument("reshape changes element count");
    return Tensor(s, data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, data_.template cast<U>().eval());
  }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Index offset(Index n, Index c, Index y, Index x) const {
    assert(n < shape_.n && c < shape_.c && y < shape_.h && x < shape_.w);
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{0, 0, 0, 0};
  Array data_;
};

}  // namespace gannotation
