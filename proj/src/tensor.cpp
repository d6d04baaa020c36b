#include "peps/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "peps/backend.hpp"
#include "peps/errors.hpp"
#include "peps/rng.hpp"

namespace peps {

namespace {
Backend g_backend;
}

const Backend& backend() { return g_backend; }
void set_backend(const Backend& b) { g_backend = b; }

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("tensor extent must be >= 1, got shape " + shape_to_string(shape_));
  }
  data_.assign(shape_size(shape_), cplx(0.0, 0.0));
}

Tensor::Tensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw ShapeError("tensor extent must be >= 1, got shape " + shape_to_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(cplx v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::eye(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<cplx> vals) {
  return Tensor(std::move(shape), std::vector<cplx>(vals));
}

std::size_t Tensor::linear_index(std::span<const std::size_t> idx) const {
  if (idx.size() != shape_.size()) throw ShapeError("index order mismatch");
  std::size_t lin = 0;
  for (std::size_t a = 0; a < shape_.size(); ++a) {
    if (idx[a] >= shape_[a]) throw ShapeError("index out of range on axis " + std::to_string(a));
    lin = lin * shape_[a] + idx[a];
  }
  return lin;
}

cplx& Tensor::operator()(std::span<const std::size_t> idx) { return data_[linear_index(idx)]; }
cplx Tensor::operator()(std::span<const std::size_t> idx) const { return data_[linear_index(idx)]; }

cplx& Tensor::at(std::initializer_list<std::size_t> idx) {
  std::vector<std::size_t> v(idx);
  return data_[linear_index(v)];
}
cplx Tensor::at(std::initializer_list<std::size_t> idx) const {
  std::vector<std::size_t> v(idx);
  return data_[linear_index(v)];
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_size(new_shape) != data_.size()) {
    throw ShapeError("reshape from " + shape_to_string(shape_) + " to " + shape_to_string(new_shape) +
                     " changes element count");
  }
  return Tensor(std::move(new_shape), data_);
}

Tensor Tensor::permute(std::span<const std::size_t> perm) const {
  const std::size_t n = shape_.size();
  if (perm.size() != n) throw ShapeError("permutation order mismatch");
  std::vector<bool> seen(n, false);
  Shape out_shape(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] >= n || seen[perm[i]]) throw ShapeError("invalid axis permutation");
    seen[perm[i]] = true;
    out_shape[i] = shape_[perm[i]];
  }
  // Identity permutation short-circuits to a data share.
  bool identity = true;
  for (std::size_t i = 0; i < n; ++i) identity = identity && perm[i] == i;
  if (identity) return *this;

  Tensor out(out_shape);
  // Strides of the source axes in the output iteration order.
  std::vector<std::size_t> src_stride(n, 1);
  for (std::size_t a = n; a-- > 1;) src_stride[a - 1] = src_stride[a] * shape_[a];
  std::vector<std::size_t> stride(n);
  for (std::size_t i = 0; i < n; ++i) stride[i] = src_stride[perm[i]];

  std::vector<std::size_t> idx(n, 0);
  const std::size_t total = data_.size();
  std::size_t src = 0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    out.data_[lin] = data_[src];
    for (std::size_t a = n; a-- > 0;) {
      src += stride[a];
      if (++idx[a] < out_shape[a]) break;
      src -= stride[a] * out_shape[a];
      idx[a] = 0;
    }
  }
  return out;
}

Tensor Tensor::permute(std::initializer_list<std::size_t> perm) const {
  std::vector<std::size_t> v(perm);
  return permute(std::span<const std::size_t>(v));
}

Tensor Tensor::conj() const {
  Tensor out(shape_, data_);
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

Tensor Tensor::operator+(const Tensor& rhs) const {
  if (!same_shape(rhs)) throw ShapeError("shape mismatch in tensor addition");
  Tensor out(shape_, data_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
  return out;
}

Tensor Tensor::operator-(const Tensor& rhs) const {
  if (!same_shape(rhs)) throw ShapeError("shape mismatch in tensor subtraction");
  Tensor out(shape_, data_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
  return out;
}

Tensor Tensor::operator*(cplx scale) const {
  Tensor out(shape_, data_);
  for (auto& v : out.data_) v *= scale;
  return out;
}

double Tensor::frobenius_norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

cplx Tensor::scalar_value() const {
  if (data_.size() != 1) throw ShapeError("scalar_value on non-scalar tensor " + shape_to_string(shape_));
  return data_[0];
}

bool Tensor::allclose(const Tensor& other, double atol) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (std::abs(data_[i] - other.data_[i]) > atol) return false;
  }
  return true;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  Tensor t(shape);
  SplitMix64 gen(seed);
  for (auto& v : t.data()) {
    double re = gen.next_symmetric();
    double im = gen.next_symmetric();
    v = cplx(re, im);
  }
  return t;
}

Tensor random_tensor_real(const Shape& shape, std::uint64_t seed) {
  Tensor t(shape);
  SplitMix64 gen(seed);
  for (auto& v : t.data()) v = cplx(gen.next_symmetric(), 0.0);
  return t;
}

cplx inner(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("shape mismatch in inner product");
  cplx s = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += std::conj(da[i]) * db[i];
  return s;
}

}  // namespace peps
