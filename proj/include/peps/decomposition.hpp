#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "peps/implicit.hpp"
#include "peps/tensor.hpp"

namespace peps {

/// Bond truncation rule: keep at most max_rank singular values and drop those
/// below rel_cutoff * sigma_max; at least one is always retained.
struct TruncationPolicy {
  std::size_t max_rank = 0;
  double rel_cutoff = 1e-14;
};

/// Randomized-SVD knobs.  oversample < 0 selects max(5, ceil(0.1 * rank)),
/// the value everything in the regression suite is locked to.
struct RsvdConfig {
  int power_iters = 2;
  int oversample = -1;
  std::uint64_t seed = 0;
};

struct SvdTriple {
  Tensor u;               // (row axes..., rank), isometric over the row group
  std::vector<double> s;  // non-increasing, >= 0
  Tensor v;               // (rank, col axes...), isometric over the col group
  bool rank_clamped = false;
};

enum class SvdStrategy { exact, implicit_rsvd };

/// Where singular weights go when a bond is split in two.
enum class Absorb { split, left, right };

/// Alg.-4 style randomized SVD of an implicit operator: random probe on
/// [-1,1] (both complex parts), orthogonalized power iterations with A and
/// A*, then a dense SVD of the small projected matrix P* A.  Deterministic
/// for a fixed cfg.seed.
SvdTriple randomized_svd(const ImplicitOperator& op, const TruncationPolicy& policy,
                         const RsvdConfig& cfg);

/// Reshape-avoiding orthogonalization: forms the small Gram matrix G = A* A,
/// eigendecomposes it, and returns Q = A R^{-1}, R = sqrt(L) X^*.  Intended
/// for row extent >> col extent.  Eigenvalues below 1e-12 * lambda_max are
/// clamped before inversion and the corresponding columns of Q are completed
/// to an orthonormal set, so rank-deficient inputs still yield an isometry.
/// The Gram route loses roughly half the digits of a direct Householder QR.
std::pair<Tensor, Tensor> gram_orthogonalize(const Tensor& a, std::size_t split);
std::pair<Tensor, Tensor> gram_orthogonalize(const ImplicitOperator& a);

struct EinsumsvdResult {
  Tensor t1;              // (row axes..., bond)
  Tensor t2;              // (bond, col axes...)
  std::vector<double> s;  // retained singular values (pre-absorption)
  bool rank_clamped = false;
};

/// Contract-and-refactor: reduces a tensor network to two tensors joined by
/// one truncated bond.  The exact strategy materializes the network and takes
/// a dense SVD; implicit_rsvd runs randomized_svd without materializing.
EinsumsvdResult einsumsvd(const ImplicitOperator& network, const TruncationPolicy& policy,
                          SvdStrategy strategy, Absorb absorb = Absorb::split,
                          const RsvdConfig& cfg = {});

namespace decomp_detail {
std::size_t effective_oversample(const RsvdConfig& cfg, std::size_t target);
std::size_t retained_rank(const std::vector<double>& s, const TruncationPolicy& policy);
Tensor scale_last_axis(const Tensor& t, const std::vector<double>& weights);
Tensor scale_first_axis(const Tensor& t, const std::vector<double>& weights);
Tensor slice_last_axis(const Tensor& t, std::size_t k);
Tensor slice_first_axis(const Tensor& t, std::size_t k);
}  // namespace decomp_detail

}  // namespace peps
