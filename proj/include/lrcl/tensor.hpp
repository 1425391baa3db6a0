#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrcl/error.hpp"

namespace lrcl {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major n-dimensional array.
///
/// A default-constructed tensor is empty (rank 0, no data). Every other
/// tensor has strictly positive extents and exactly product(shape)
/// elements. Gradients are not stored here; they live on the nodes of
/// an autodiff Graph.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(T value) noexcept { std::fill(data_.begin(), data_.end(), value); }

  /// Same data viewed under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

 private:
  void check_extents() const {
    for (std::size_t axis = 0; axis < shape_.size(); ++axis) {
      if (shape_[axis] == 0) {
        throw ShapeError("tensor extent at axis " + std::to_string(axis) + " is zero in shape " +
                         shape_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

/// Byte-level equality of shape and contents (distinguishes -0.0 and NaN payloads).
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0);
}

/// Copies row `index` of a tensor's leading axis into a tensor of the trailing shape.
template <typename T>
BasicTensor<T> slice_leading(const BasicTensor<T>& t, std::size_t index) {
  Shape inner(t.shape().begin() + 1, t.shape().end());
  if (inner.empty()) inner.push_back(1);
  const std::size_t stride = shape_size(inner);
  std::vector<T> out(t.data().begin() + static_cast<std::ptrdiff_t>(index * stride),
                     t.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return BasicTensor<T>(std::move(inner), std::move(out));
}

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
BasicTensor<T> stack(std::span<const BasicTensor<T>* const> items) {
  if (items.empty()) throw EmptyError("cannot stack an empty list of tensors");
  const Shape& inner = items.front()->shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<T> out;
  out.reserve(shape_size(shape));
  for (const auto* item : items) {
    if (item->shape() != inner) {
      throw ShapeError("cannot stack " + shape_string(item->shape()) + " with " + shape_string(inner));
    }
    out.insert(out.end(), item->data().begin(), item->data().end());
  }
  return BasicTensor<T>(std::move(shape), std::move(out));
}

}  // namespace lrcl
