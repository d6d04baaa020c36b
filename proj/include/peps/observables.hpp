#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "peps/contraction.hpp"
#include "peps/state.hpp"
#include "peps/tensor.hpp"

namespace peps {

/// One local term: coefficient times a 1-site (d x d) or 2-site (d,d,d,d)
/// operator on lattice coordinates.
struct LocalTerm {
  cplx coeff = 1.0;
  std::vector<Coord> sites;
  Tensor op;
};

/// Sum of local terms, H = sum_i H_i.
class Observable {
 public:
  Observable() = default;

  Observable& add(cplx coeff, Coord a, const Tensor& op1);
  Observable& add(cplx coeff, Coord a, Coord b, const Tensor& op2);
  Observable& operator+=(const Observable& other);

  const std::vector<LocalTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  /// Termwise Hermiticity: ||H_i - H_i^*|| < tol for every term (coefficient
  /// included).
  bool is_hermitian(double tol = 1e-12) const;

  /// Text format, one term per line: `coeff P@(r,c) [P@(r,c)]` with
  /// P in {X, Y, Z, I}, plus a raw-matrix escape `M[...]@(r,c)`.
  static Observable parse(const std::string& text);
  std::string to_text() const;

 private:
  std::vector<LocalTerm> terms_;
};

/// J1-J2 Heisenberg model with a field: XX/YY/ZZ on nearest neighbors (J1),
/// on diagonal neighbors (J2) and single-site X/Y/Z fields (h).  Term order
/// is fields site-major, then horizontal pairs row-major, then vertical, then
/// diagonal; the ITE driver applies terms in exactly this order.
Observable build_j1j2(std::size_t rows, std::size_t cols, std::array<double, 3> j1,
                      std::array<double, 3> j2, std::array<double, 3> h);

/// Partial two-layer contractions of <psi|psi> from the top and bottom; entry
/// k holds rows 0..k (tops) or k..n-1 (bots).
struct RowCache {
  std::vector<TwoLayerBoundary> tops;
  std::vector<TwoLayerBoundary> bots;
};

RowCache build_row_cache(const PepsState& s, const ContractOption& opt);

struct ExpectationStats {
  std::size_t full_sweeps = 0;
  std::size_t band_contractions = 0;
  std::uint64_t flops = 0;
};

struct ExpectationOptions {
  ContractOption contract;
  bool use_cache = true;
  /// Reuse per-band left/right environments across terms (faster for many
  /// terms; the default keeps one band contraction per term).
  bool shared_environments = false;
  /// Permit a non-Hermitian observable and return the complex sum.
  bool allow_complex = false;
};

struct ExpectationResult {
  double value = 0.0;   // Rayleigh quotient, real part
  cplx raw_sum;         // unnormalized sum of term values
  double norm_sq = 0.0; // <psi|psi>
  cplx complex_value;   // raw_sum / norm_sq before the Hermiticity check
  ExpectationStats stats;
};

/// Sum of local-term expectation values over the norm.  Each term is
/// evaluated by sandwiching the operator inside the two-layer network and
/// contracting a band of at most two rows between cached (or recomputed)
/// boundaries.  Cached and uncached evaluation run the identical arithmetic,
/// so they agree to rounding.
ExpectationResult expectation(const PepsState& s, const Observable& obs,
                              const ExpectationOptions& opt);

/// Trotter-based estimate (single contraction): applies e^{+tau H_j} for
/// every term to a copy of the state and returns
/// (<psi|prod_j e^{tau H_j}|psi> - <psi|psi>) / (tau <psi|psi>).
/// Throws if the growth policy cannot hold the exact local applications.
double expectation_trotter(const PepsState& s, const Observable& obs, double tau,
                           const ExpectationOptions& opt, const UpdateOption& growth);

}  // namespace peps
