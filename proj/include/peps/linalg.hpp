#pragma once

#include <functional>
#include <vector>

#include "peps/tensor.hpp"

namespace peps {

/// Thin SVD of a tensor matricized over (first `split` axes | rest).
/// u: (row axes..., k), v: (k, col axes...) with k = min(row, col) extents;
/// zero singular values are kept.  s is non-negative, non-increasing.  The
/// phase of each left singular vector is fixed so its largest-magnitude entry
/// is real positive.
struct SvdResult {
  Tensor u;
  std::vector<double> s;
  Tensor v;
};

SvdResult svd(const Tensor& t, std::size_t split);
SvdResult svd(Tensor&& t, std::size_t split);

/// Thin QR over the same matricization; requires row extent >= col extent.
/// The diagonal of r is made real non-negative.
struct QrResult {
  Tensor q;  // (row axes..., k)
  Tensor r;  // (k, col axes...)
};

QrResult qr(const Tensor& t, std::size_t split);

/// Hermitian eigendecomposition of a square matrix tensor.  Validates
/// Hermiticity within 1e-10 relative and symmetrizes internally.  Eigenvalues
/// are sorted descending; vectors(i, j) is component i of eigenvector j.
struct EighResult {
  std::vector<double> values;
  Tensor vectors;
};

EighResult eigh(const Tensor& m);

/// Applies a scalar function to the spectrum of a Hermitian matrix:
/// returns X f(L) X^H.  Used for local e^{-tau H} gates.
Tensor hermitian_function(const Tensor& m, const std::function<double(double)>& f);

namespace linalg_detail {
// Standard dense-kernel flop counts (complex multiply-add = 2 flops unit).
std::uint64_t svd_flops(std::size_t rows, std::size_t cols);
std::uint64_t qr_flops(std::size_t rows, std::size_t cols);
std::uint64_t eigh_flops(std::size_t n);
}  // namespace linalg_detail

}  // namespace peps
