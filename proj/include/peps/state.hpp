#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "peps/decomposition.hpp"
#include "peps/tensor.hpp"

namespace peps {

struct Coord {
  std::size_t row = 0, col = 0;
  bool operator==(const Coord&) const = default;
};

/// Gate application strategies for two-site updates: contract-and-split
/// directly, or QR-reduce both sites first (Householder or Gram-matrix
/// orthogonalization) and split only the small reduced pair.
enum class UpdateStrategy { direct, qr_svd, qr_svd_gram };

struct UpdateOption {
  /// max_rank 0 selects d * (pre-gate bond): no information loss.
  TruncationPolicy policy{0, 1e-14};
  UpdateStrategy strategy = UpdateStrategy::qr_svd_gram;
};

/// PEPS on an n_r x n_c lattice.  Site tensors have axis convention
/// (physical, up, left, down, right); bonds facing the lattice boundary keep
/// extent 1 so every site is uniformly order 5.  States are immutable
/// values; gate application returns a new state.
class PepsState {
 public:
  PepsState(std::size_t rows, std::size_t cols, std::size_t phys_dim, std::vector<Tensor> sites);

  /// Product basis state |bits>; all bonds have extent 1.
  static PepsState computational_basis(std::size_t rows, std::size_t cols,
                                       std::span<const int> bits, std::size_t phys_dim = 2);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t phys_dim() const { return phys_; }
  std::size_t qubits() const { return rows_ * cols_; }

  const Tensor& site(std::size_t r, std::size_t c) const { return sites_[r * cols_ + c]; }
  Tensor& site(std::size_t r, std::size_t c) { return sites_[r * cols_ + c]; }
  const std::vector<Tensor>& sites() const { return sites_; }

  /// Extent of the bond between (r, c) and its right / down neighbor.
  std::size_t bond_right(std::size_t r, std::size_t c) const { return site(r, c).extent(4); }
  std::size_t bond_down(std::size_t r, std::size_t c) const { return site(r, c).extent(3); }
  std::size_t max_bond() const;

  void check_coord(Coord a) const;
  void validate() const;

 private:
  std::size_t rows_, cols_, phys_;
  std::vector<Tensor> sites_;  // row-major
};

/// One-site gate (Eq.-3 style contraction); exact, bonds unchanged.
PepsState apply_one_site(const PepsState& s, const Tensor& gate, Coord target);

/// Two-site gate on lattice-adjacent sites by contract-and-refactor; the
/// shared bond is truncated per the option.  Gate tensor axes are
/// (out_a, out_b, in_a, in_b) for targets (a, b).
PepsState apply_two_site(const PepsState& s, const Tensor& gate, Coord a, Coord b,
                         const UpdateOption& opt = {});

/// Two-site gate on arbitrary distinct sites: routes with a SWAP chain along
/// the row first, then the column, applies the gate at adjacency and swaps
/// back.  Bond growth is bounded by the option at every step.
PepsState apply_distant(const PepsState& s, const Tensor& gate, Coord a, Coord b,
                        const UpdateOption& opt = {});

/// Self-describing binary container; round-trips bitwise.
void save_peps(const PepsState& s, const std::string& path);
PepsState load_peps(const std::string& path);

namespace gates {
Tensor I2();
Tensor X();
Tensor Y();
Tensor Z();
Tensor H();
Tensor Ry(double theta);
Tensor sqrtX();
Tensor sqrtY();
Tensor sqrtW();
Tensor CNOT();
Tensor SWAP();
Tensor ISWAP();
Tensor CZ();
/// kron of two one-site operators as a (d,d,d,d) two-site gate tensor.
Tensor two_site(const Tensor& a, const Tensor& b);
}  // namespace gates

}  // namespace peps
