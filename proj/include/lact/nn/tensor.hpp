#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lact/error.hpp"

namespace lact::nn {

enum class Mode { train, eval };

inline std::size_t shape_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Storage aligned to the widest vector unit, so that the alignment of every
/// operand handed to Eigen, and therefore its summation order, depends only on
/// tensor shapes and not on where the allocator happened to put the buffer.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense row-major array with at most four axes; axis 0 is the batch.
template <class T>
class Tensor {
 public:
  static constexpr std::size_t max_rank = 4;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_count(shape_), fill) {
    check_rank();
  }
  Tensor(std::vector<std::size_t> shape, const std::vector<T>& data)
      : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}
  Tensor(std::vector<std::size_t> shape, AlignedVector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_rank();
    if (data_.size() != shape_count(shape_))
      throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                       shape_str(shape_));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Elements per batch item.
  std::size_t item_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (shape_count(shape) != data_.size())
      throw ShapeError("Tensor: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, AlignedVector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_rank() const {
    if (shape_.size() > max_rank)
      throw ShapeError("Tensor: rank " + std::to_string(shape_.size()) + " exceeds 4");
  }

  std::vector<std::size_t> shape_;
  AlignedVector<T> data_;
};

/// A trainable array and its accumulated gradient.
template <class T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(Tensor<T> v) : value(std::move(v)), grad(value.shape()) {}
};

template <class T>
struct NamedParam {
  std::string name;
  Param<T>* param;
};

/// Non-trainable state saved with a model (batchnorm running statistics).
template <class T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

}  // namespace lact::nn
