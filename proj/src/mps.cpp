#include "peps/mps.hpp"

#include <algorithm>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/rng.hpp"

namespace peps {

std::size_t Mps::max_bond() const {
  std::size_t m = 1;
  for (const auto& t : sites) m = std::max(m, t.extent(2));
  return m;
}

void Mps::validate() const {
  if (sites.empty()) throw ShapeError("empty MPS");
  if (sites.front().extent(1) != 1 || sites.back().extent(2) != 1) {
    throw ShapeError("MPS boundary bonds must have extent 1");
  }
  for (std::size_t i = 0; i + 1 < sites.size(); ++i) {
    if (sites[i].extent(2) != sites[i + 1].extent(1)) {
      throw ShapeError("MPS bond mismatch between sites " + std::to_string(i) + " and " +
                       std::to_string(i + 1));
    }
  }
}

void Mpo::validate() const {
  if (sites.empty()) throw ShapeError("empty MPO");
  if (sites.front().extent(2) != 1 || sites.back().extent(3) != 1) {
    throw ShapeError("MPO boundary bonds must have extent 1");
  }
  for (std::size_t i = 0; i + 1 < sites.size(); ++i) {
    if (sites[i].extent(3) != sites[i + 1].extent(2)) {
      throw ShapeError("MPO bond mismatch between sites " + std::to_string(i) + " and " +
                       std::to_string(i + 1));
    }
  }
}

Mps approx_apply_mpo(const Mps& s, const Mpo& o, const ApplyOption& opt) {
  s.validate();
  o.validate();
  const std::size_t n = s.length();
  if (o.length() != n) throw ShapeError("MPS/MPO length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (s.sites[i].extent(0) != o.sites[i].extent(0)) {
      throw ShapeError("physical extent mismatch at site " + std::to_string(i));
    }
  }

  Mps out;
  out.sites.resize(n);

  // Pending tensor carries (new-left-bond a, new physical d, mps bond, mpo bond).
  // v1 = sum_p s1(p, l, r) o1(p, d, L, R) with l, L merged into a.
  Tensor v = contract("plr,pdLR->lLdrR", s.sites[0], o.sites[0]);
  v = v.reshape({s.sites[0].extent(1) * o.sites[0].extent(2), o.sites[0].extent(1),
                 s.sites[0].extent(2), o.sites[0].extent(3)});

  if (n == 1) {
    out.sites[0] = v.permute({1, 0, 2, 3})
                       .reshape({v.extent(1), v.extent(0), v.extent(2) * v.extent(3)});
    return out;
  }

  for (std::size_t i = 1; i < n; ++i) {
    ImplicitOperator net({v, s.sites[i], o.sites[i]}, {"adso", "pst", "peoq"}, "ad", "etq");
    RsvdConfig cfg = opt.rsvd;
    cfg.seed = derive_seed(opt.seed_base, i);
    EinsumsvdResult split = einsumsvd(net, opt.policy, opt.strategy, opt.absorb, cfg);
    // split.t1: (a, d, rho) -> site (d, a, rho)
    out.sites[i - 1] = split.t1.permute({1, 0, 2});
    v = split.t2;  // (rho, e, t, q)
  }
  // Last pending tensor has trailing bonds of extent 1.
  out.sites[n - 1] =
      v.permute({1, 0, 2, 3}).reshape({v.extent(1), v.extent(0), v.extent(2) * v.extent(3)});
  out.validate();
  return out;
}

Mps exact_apply_mpo(const Mps& s, const Mpo& o) {
  s.validate();
  o.validate();
  const std::size_t n = s.length();
  if (o.length() != n) throw ShapeError("MPS/MPO length mismatch");
  Mps out;
  out.sites.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t = contract("plr,pdLR->dlLrR", s.sites[i], o.sites[i]);
    out.sites.push_back(t.reshape({o.sites[i].extent(1), s.sites[i].extent(1) * o.sites[i].extent(2),
                                   s.sites[i].extent(2) * o.sites[i].extent(3)}));
  }
  out.validate();
  return out;
}

cplx chain_scalar(const Mps& s) {
  s.validate();
  Tensor t = Tensor::from_values({1}, {cplx(1.0, 0.0)});
  for (const auto& site : s.sites) {
    if (site.extent(0) != 1) throw ShapeError("chain_scalar requires physical extents 1");
    t = contract("l,plr->r", t, site);
  }
  return t.scalar_value();
}

cplx mps_overlap(const Mps& a, const Mps& b) {
  if (a.length() != b.length()) throw ShapeError("MPS length mismatch in overlap");
  Tensor l = Tensor::from_values({1, 1}, {cplx(1.0, 0.0)});
  for (std::size_t i = 0; i < a.length(); ++i) {
    l = contract("ab,pac,pbd->cd", l, a.sites[i].conj(), b.sites[i]);
  }
  return l.scalar_value();
}

cplx mps_glue(const Mps& top, const Mps& bottom) {
  if (top.length() != bottom.length()) throw ShapeError("MPS length mismatch in glue");
  Tensor l = Tensor::from_values({1, 1}, {cplx(1.0, 0.0)});
  for (std::size_t i = 0; i < top.length(); ++i) {
    l = contract("ab,pac,pbd->cd", l, top.sites[i], bottom.sites[i]);
  }
  return l.scalar_value();
}

}  // namespace peps
