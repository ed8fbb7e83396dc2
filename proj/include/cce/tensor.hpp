#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cce/error.hpp"

namespace cce::num {

inline std::string format_shape(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor. The scalar type selects the precision: float for
// training, double for gradient-check suites.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), v_(count(shape_), S(0)) {}

  Tensor(std::vector<std::size_t> shape, std::vector<S> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != count(shape_)) {
      throw DimensionError("tensor values length " + std::to_string(v_.size()) +
                           " does not match shape " + format_shape(shape_));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::string shape_str() const { return format_shape(shape_); }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  // 2-D accessors (row-major).
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 0 : shape_[1]; }

  S& operator[](std::size_t k) { return v_[k]; }
  S operator[](std::size_t k) const { return v_[k]; }
  S& operator()(std::size_t i) { return v_[i]; }
  S operator()(std::size_t i) const { return v_[i]; }
  S& operator()(std::size_t i, std::size_t j) { return v_[i * shape_[1] + j]; }
  S operator()(std::size_t i, std::size_t j) const {
    return v_[i * shape_[1] + j];
  }

  S* data() { return v_.data(); }
  const S* data() const { return v_.data(); }
  S* row(std::size_t i) { return v_.data() + i * cols(); }
  const S* row(std::size_t i) const { return v_.data() + i * cols(); }

  std::vector<S>& values() { return v_; }
  const std::vector<S>& values() const { return v_; }

  void fill(S x) {
    for (auto& e : v_) e = x;
  }
  void zero() { fill(S(0)); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const auto& e : v_) {
      if (!std::isfinite(static_cast<double>(e))) return false;
    }
    return true;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::size_t k = 0; k < v_.size(); ++k) {
      out[k] = static_cast<T>(v_[k]);
    }
    return out;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && v_ == other.v_;
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<S> v_;
};

// Parameter tensor paired with its gradient accumulator. Every backward pass
// in this codebase accumulates (+=) into .grad; training loops zero grads at
// batch boundaries.
template <typename S>
struct Param {
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  explicit Param(std::vector<std::size_t> shape)
      : value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.zero(); }

  template <typename T>
  Param<T> cast() const {
    Param<T> out;
    out.value = value.template cast<T>();
    out.grad = Tensor<T>(value.shape());
    return out;
  }
};

// Named references to a model's parameters in a fixed enumeration order.
// Serves the optimizer, serialization, hashing and gradient checking.
template <typename S>
using ParamMap = std::vector<std::pair<std::string, Param<S>*>>;

}  // namespace cce::num
