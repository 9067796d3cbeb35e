#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace teamemb {

using Shape = std::vector<int>;

// Raised whenever operand shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor. The gradient buffer is allocated on demand and
// always has the same length as the data buffer. Training runs on float;
// the double instantiation exists for finite-difference verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor chw(int channels, int height, int width, T fill = T(0)) {
    return BasicTensor({channels, height, width}, fill);
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 [C,H,W] accessors.
  T& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  T at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  bool has_grad() const { return grad_.size() == data_.size() && !data_.empty(); }
  void enable_grad();
  void zero_grad();
  void drop_grad() {
    grad_.clear();
    grad_.shrink_to_fit();
  }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  BasicTensor reshaped(Shape shape) const;
  bool all_finite() const;
  bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

template <typename T>
void require_rank(const BasicTensor<T>& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace teamemb
