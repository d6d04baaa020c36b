#pragma once

#include <cstdint>
#include <vector>

#include "peps/decomposition.hpp"
#include "peps/tensor.hpp"

namespace peps {

/// Tensor chain with axis convention (physical-or-open, left bond, right
/// bond); boundary bonds have extent 1.
struct Mps {
  std::vector<Tensor> sites;

  std::size_t length() const { return sites.size(); }
  std::size_t phys(std::size_t i) const { return sites[i].extent(0); }
  std::size_t left_bond(std::size_t i) const { return sites[i].extent(1); }
  std::size_t right_bond(std::size_t i) const { return sites[i].extent(2); }
  std::size_t max_bond() const;
  void validate() const;
};

/// Operator chain with axes (up, down, left bond, right bond).
struct Mpo {
  std::vector<Tensor> sites;

  std::size_t length() const { return sites.size(); }
  void validate() const;
};

struct ApplyOption {
  TruncationPolicy policy;
  SvdStrategy strategy = SvdStrategy::exact;
  RsvdConfig rsvd;
  Absorb absorb = Absorb::split;
  /// Per-column probe seeds are derived from this and the column index.
  std::uint64_t seed_base = 0;
};

/// Applies an MPO to an MPS with a left-to-right einsumsvd sweep (zip-up),
/// truncating every new bond by the option's policy.  The MPO up index
/// contracts with the MPS physical index; the result's physical index is the
/// MPO down index.
Mps approx_apply_mpo(const Mps& s, const Mpo& o, const ApplyOption& opt);

/// Exact product: per-site contraction with merged bonds, no truncation.
Mps exact_apply_mpo(const Mps& s, const Mpo& o);

/// Contracts a chain whose physical extents are all 1 to a scalar, exactly,
/// left to right.
cplx chain_scalar(const Mps& s);

/// <a|b> for equal-length chains (a is conjugated).
cplx mps_overlap(const Mps& a, const Mps& b);

/// Zipper product of two chains without conjugation, summing the shared
/// physical index; used to glue two halves of an exact network contraction.
cplx mps_glue(const Mps& top, const Mps& bottom);

}  // namespace peps
