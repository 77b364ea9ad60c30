// Dense row-major array of doubles with a dynamic shape. This is the value
// type carried by every autodiff node; it deliberately stays minimal (no
// expression templates, no views) so the gradient code stays auditable.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "iada/errors.hpp"

namespace iada {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ")";
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

class Array {
 public:
  Array() = default;

  explicit Array(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Array(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeError("Array: data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Array scalar(double v) { return Array(Shape{}, {v}); }
  static Array vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Array(Shape{n}, std::move(v));
  }
  static Array matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> v) {
    return Array(Shape{rows, cols}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::size_t rows() const { return rank() >= 1 ? shape_[0] : 1; }
  std::size_t cols() const { return rank() >= 2 ? shape_[1] : 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors (rank-2 arrays only; unchecked beyond debug builds).
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  bool same_shape(const Array& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double item() const {
    if (size() != 1)
      throw ShapeError("Array::item: expected one element, shape is " +
                       shape_str(shape_));
    return data_[0];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  const std::vector<double>& flat() const { return data_; }
  std::vector<double>& flat() { return data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Array& a, const Array& b) {
  if (!a.same_shape(b))
    throw ShapeError("max_abs_diff: shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace iada
