#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peps/mps.hpp"
#include "peps/state.hpp"

namespace peps {

enum class ContractFamily { exact, bmps, ibmps, two_layer_ibmps };

std::string family_name(ContractFamily f);

struct ContractOption {
  ContractFamily family = ContractFamily::bmps;
  /// Boundary-MPS truncation; max_rank 0 means unbounded (exact growth).
  TruncationPolicy trunc{0, 1e-14};
  SvdStrategy strategy = SvdStrategy::exact;
  RsvdConfig rsvd;
  bool canonicalize = true;
  std::uint64_t seed = 0;
  std::size_t memory_budget = std::size_t(1) << 27;

  static ContractOption exact_network(std::size_t budget = std::size_t(1) << 27);
  static ContractOption bmps_opt(std::size_t m, std::uint64_t seed = 0);
  static ContractOption ibmps_opt(std::size_t m, std::uint64_t seed = 0, int power_iters = 2);
  static ContractOption two_layer_opt(std::size_t m, std::uint64_t seed = 0, int power_iters = 2);
};

/// Per-contraction instrumentation record (serializable to JSON).
struct ContractionReport {
  std::string family;
  std::size_t m = 0;
  std::uint64_t flops = 0;
  std::uint64_t peak_intermediate_elements = 0;
  std::uint64_t seed = 0;
  double value_re = 0.0, value_im = 0.0;
  double seconds = 0.0;

  std::string to_json() const;
};

/// Grid of order-4 tensors (up, left, down, right): a PEPS without physical
/// indices.  Boundary bonds have extent 1.
class OneLayerGrid {
 public:
  OneLayerGrid(std::size_t rows, std::size_t cols, std::vector<Tensor> sites);
  static OneLayerGrid random(std::size_t rows, std::size_t cols, std::size_t bond,
                             std::uint64_t seed);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Tensor& site(std::size_t r, std::size_t c) const { return sites_[r * cols_ + c]; }
  std::size_t max_bond() const;
  OneLayerGrid transposed() const;

 private:
  std::size_t rows_, cols_;
  std::vector<Tensor> sites_;
};

/// Exact contraction by untruncated boundary absorption from both ends with a
/// final zipper.  Refuses (ResourceError) if any intermediate would exceed
/// the element budget.
cplx contract_exact(const OneLayerGrid& g, std::size_t memory_budget = std::size_t(1) << 27);

/// Dispatches on option.family (exact / bmps / ibmps).
cplx contract_one_layer(const OneLayerGrid& g, const ContractOption& opt,
                        ContractionReport* report = nullptr);

/// Boundary MPS for the two-layer sandwich; the physical index of each site
/// is the merged pair (bra-bond, ket-bond), with the pair extents kept.
struct TwoLayerBoundary {
  Mps mps;
  std::vector<std::pair<std::size_t, std::size_t>> phys;
};

TwoLayerBoundary two_layer_first_row(const PepsState& bra, const PepsState& ket);
TwoLayerBoundary two_layer_apply_row(const TwoLayerBoundary& top, const PepsState& bra,
                                     const PepsState& ket, std::size_t row,
                                     const ContractOption& opt, std::uint64_t seed_tag);

/// <bra|ket> via two-layer boundary contraction; the merged one-layer network
/// is never materialized.
cplx contract_two_layer(const PepsState& bra, const PepsState& ket, const ContractOption& opt,
                        ContractionReport* report = nullptr);

/// A small operator tensor wired between the layers at one site.  op axes are
/// (d_out, d_in, bond...) where trailing axes pair up across pieces that
/// share a bond id (the two halves of a split two-site operator).
struct InsertionPiece {
  Coord site;
  Tensor op;
  std::vector<int> bond_ids;
};

/// Exact column-by-column value of the rows [r0, r1] sandwiched between the
/// given boundaries (either may be null at the lattice edge), with operator
/// pieces inserted.  r1 - r0 <= 1.
cplx band_value(const TwoLayerBoundary* top, const PepsState& bra, const PepsState& ket,
                std::size_t r0, std::size_t r1, const TwoLayerBoundary* bottom,
                std::span<const InsertionPiece> pieces);

/// Left environments of the plain band (no insertions): entry c is the zipper
/// state after absorbing columns 0..c.  Used to splice many local-operator
/// values out of one band.
struct BandEnvironment {
  std::vector<Tensor> left;    // index c: after columns 0..c
  std::vector<Tensor> right;   // index c: after columns c..n-1 (from the right)
  std::size_t r0 = 0, r1 = 0;
};

BandEnvironment band_environment(const TwoLayerBoundary* top, const PepsState& bra,
                                 const PepsState& ket, std::size_t r0, std::size_t r1,
                                 const TwoLayerBoundary* bottom);

/// Band value with insertions confined to columns [c0, c1], reusing the
/// precomputed environments.
cplx band_splice(const BandEnvironment& env, const TwoLayerBoundary* top, const PepsState& bra,
                 const PepsState& ket, const TwoLayerBoundary* bottom,
                 std::span<const InsertionPiece> pieces, std::size_t c0, std::size_t c1);

/// Projects physical indices onto a basis string, yielding a one-layer grid.
OneLayerGrid project_to_one_layer(const PepsState& s, std::span<const int> bits);

/// Contracts bra* and ket site pairs over the physical index, materializing
/// the merged one-layer network (bond extents multiply).
OneLayerGrid merge_two_layer(const PepsState& bra, const PepsState& ket);

/// <bits|psi> computed by projecting and contracting per the option family.
cplx amplitude(const PepsState& s, std::span<const int> bits, const ContractOption& opt,
               ContractionReport* report = nullptr);

cplx inner_product(const PepsState& bra, const PepsState& ket, const ContractOption& opt);
double norm(const PepsState& s, const ContractOption& opt);

}  // namespace peps
