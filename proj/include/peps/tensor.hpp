#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace peps {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

/// Dense complex tensor with a fixed row-major linearization: the last index
/// is the fastest.  Every fold/unfold in the library is defined relative to
/// this order, so reshape is a pure relabeling of the same data.
/// Tensors are immutable values in practice: operations return new tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<cplx> data);

  /// Scalar (order-0) tensor.
  static Tensor scalar(cplx v);
  static Tensor zeros(Shape shape);
  /// Identity matrix as an n-by-n tensor.
  static Tensor eye(std::size_t n);
  static Tensor from_values(Shape shape, std::initializer_list<cplx> vals);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  cplx& operator()(std::span<const std::size_t> idx);
  cplx operator()(std::span<const std::size_t> idx) const;
  cplx& at(std::initializer_list<std::size_t> idx);
  cplx at(std::initializer_list<std::size_t> idx) const;

  /// Pure relabeling; product of extents must match.  Data is shared bitwise.
  Tensor reshape(Shape new_shape) const;
  /// Reorders axes; perm[i] names the source axis that becomes axis i.
  Tensor permute(std::span<const std::size_t> perm) const;
  Tensor permute(std::initializer_list<std::size_t> perm) const;
  Tensor conj() const;

  Tensor operator+(const Tensor& rhs) const;
  Tensor operator-(const Tensor& rhs) const;
  Tensor operator*(cplx scale) const;

  double frobenius_norm() const;
  double max_abs() const;
  cplx scalar_value() const;  // requires size() == 1

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool allclose(const Tensor& other, double atol) const;

  std::size_t linear_index(std::span<const std::size_t> idx) const;

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Random tensor with independent real and imaginary parts uniform on
/// [-1, 1], generated by SplitMix64.  Identical (shape, seed) give bitwise
/// identical tensors.
Tensor random_tensor(const Shape& shape, std::uint64_t seed);

/// Real-valued variant (imaginary parts zero), same stream discipline.
Tensor random_tensor_real(const Shape& shape, std::uint64_t seed);

/// <a, b> = sum conj(a_i) b_i over identical shapes.
cplx inner(const Tensor& a, const Tensor& b);

}  // namespace peps
