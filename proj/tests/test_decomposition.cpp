#include <cmath>
#include <complex>

#include "doctest.h"
#include "peps/decomposition.hpp"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/implicit.hpp"
#include "peps/instrument.hpp"
#include "peps/linalg.hpp"
#include "peps/tensor.hpp"

using namespace peps;

namespace {

Tensor assemble(const Tensor& u, const std::vector<double>& s, const Tensor& v) {
  const std::size_t k = s.size();
  Tensor us = u;
  auto d = us.data();
  const std::size_t lead = us.size() / k;
  for (std::size_t i = 0; i < lead; ++i) {
    for (std::size_t j = 0; j < k; ++j) d[i * k + j] *= s[j];
  }
  return contract("ik,kj->ij", us.reshape({lead, k}), v.reshape({k, v.size() / k}));
}

double rel_err(const Tensor& got, const Tensor& want) {
  return (got.reshape({got.size()}) - want.reshape({want.size()})).frobenius_norm() /
         want.frobenius_norm();
}

}  // namespace

TEST_CASE("implicit apply of the identity network returns the probe") {
  ImplicitOperator op({Tensor::eye(2)}, {"rc"}, "r", "c");
  Tensor q = random_tensor({2, 1}, 4);
  Tensor got = op.apply(q);
  CHECK((got - q).max_abs() < 1e-15);
}

TEST_CASE("implicit two-tensor chain matches the explicit product") {
  Tensor a = random_tensor({2, 3}, 1);
  Tensor b = random_tensor({3, 4}, 2);
  ImplicitOperator op({a, b}, {"rm", "mc"}, "r", "c");
  Tensor q = random_tensor({4, 2}, 3);
  Tensor ab = contract("rm,mc->rc", a, b);
  Tensor want = contract("rc,cp->rp", ab, q);
  Tensor got = op.apply(q);
  CHECK((got - want).max_abs() < 1e-13);

  Tensor mat = op.materialize();
  CHECK((mat - ab).max_abs() < 1e-13);
}

TEST_CASE("apply and adjoint apply are mutually adjoint") {
  // Random 3-tensor network: (r x m) (m x n c) (n x s) with rows (r, s), cols (c).
  Tensor a = random_tensor({3, 4}, 11);
  Tensor b = random_tensor({4, 2, 5}, 12);
  Tensor c = random_tensor({2, 3}, 13);
  ImplicitOperator op({a, b, c}, {"rm", "mnc", "ns"}, "rs", "c");
  Tensor q = random_tensor({5, 2}, 14);
  Tensor p = random_tensor({3, 3, 2}, 15);
  cplx lhs = inner(p, op.apply(q));
  cplx rhs = inner(op.adjoint_apply(p), q);
  CHECK(std::abs(lhs - rhs) < 1e-11 * std::abs(lhs));
}

TEST_CASE("implicit apply never materializes the operator on a BMPS-shaped network") {
  // Zip-up step network: V (a, d, s, o), S (p, s, t), O (p, e, o, q) with
  // rows (a, d), cols (e, t, q); materialized size would be a*d*e*t*q.
  const std::size_t m = 8, r = 4;
  Tensor v = random_tensor({m, r, m, r}, 1);
  Tensor s = random_tensor({r, m, m}, 2);
  Tensor o = random_tensor({r, r, r, r}, 3);
  ImplicitOperator op({v, s, o}, {"adso", "pst", "peoq"}, "ad", "etq");
  Tensor q = random_tensor({r, m, r, m + 5}, 4);
  instr::reset();
  op.apply(q);
  const std::uint64_t materialized = m * r * r * m * r;
  CHECK(instr::peak_elements() < materialized);
}

TEST_CASE("gram orthogonalize of a basis column") {
  Tensor a({8, 1});
  a.at({0, 0}) = 1.0;
  auto [q, r] = gram_orthogonalize(a, 1);
  CHECK(q.shape() == Shape{8, 1});
  CHECK(std::abs(q.at({0, 0}) - cplx(1.0, 0)) < 1e-12);
  for (std::size_t i = 1; i < 8; ++i) CHECK(std::abs(q.at({i, 0})) < 1e-12);
  CHECK(std::abs(r.at({0, 0}) - cplx(1.0, 0)) < 1e-12);
}

TEST_CASE("gram orthogonalize of a well-conditioned matrix") {
  Tensor a = random_tensor({64, 4}, 17);
  auto [q, r] = gram_orthogonalize(a, 1);
  Tensor qtq = contract("ik,il->kl", q.conj(), q);
  CHECK((qtq - Tensor::eye(4)).max_abs() < 1e-9);
  Tensor rec = contract("ik,kj->ij", q, r);
  CHECK(rel_err(rec, a) < 1e-9);
}

TEST_CASE("gram orthogonalize survives rank deficiency") {
  // Two identical columns.
  Tensor base = random_tensor({32, 3}, 23);
  Tensor a({32, 4});
  for (std::size_t i = 0; i < 32; ++i) {
    a.at({i, 0}) = base.at({i, 0});
    a.at({i, 1}) = base.at({i, 1});
    a.at({i, 2}) = base.at({i, 0});  // duplicate of column 0
    a.at({i, 3}) = base.at({i, 2});
  }
  auto [q, r] = gram_orthogonalize(a, 1);
  Tensor qtq = contract("ik,il->kl", q.conj(), q);
  CHECK((qtq - Tensor::eye(4)).max_abs() < 1e-6);
  Tensor rec = contract("ik,kj->ij", q, r);
  CHECK(rel_err(rec, a) < 1e-5);
}

TEST_CASE("gram orthogonalize rejects the zero operator") {
  Tensor a = Tensor::zeros({8, 2});
  CHECK_THROWS_AS(gram_orthogonalize(a, 1), NumericalError);
}

TEST_CASE("implicit-operator gram orthogonalization matches the dense route") {
  Tensor a = random_tensor({6, 4, 3}, 31);  // rows (6,4), cols (3)
  ImplicitOperator op({a}, {"rsc"}, "rs", "c");
  auto [qi, ri] = gram_orthogonalize(op);
  auto [qd, rd] = gram_orthogonalize(a.reshape({24, 3}), 1);
  CHECK(rel_err(qi.reshape({24, 3}), qd) < 1e-10);
  CHECK(rel_err(ri, rd.reshape({3, 3})) < 1e-10);
}

TEST_CASE("randomized svd of an exact-rank diagonal") {
  Tensor d({4, 4});
  d.at({0, 0}) = 3.0;
  d.at({1, 1}) = 2.0;
  d.at({2, 2}) = 1.0;
  ImplicitOperator op({d}, {"rc"}, "r", "c");
  SvdTriple t = randomized_svd(op, {3, 1e-14}, {2, -1, 7});
  REQUIRE(t.s.size() == 3);
  CHECK(std::abs(t.s[0] - 3.0) < 1e-10);
  CHECK(std::abs(t.s[1] - 2.0) < 1e-10);
  CHECK(std::abs(t.s[2] - 1.0) < 1e-10);
}

TEST_CASE("randomized svd recovers an exact rank-5 matrix") {
  Tensor l = random_tensor({8, 5}, 41);
  Tensor r = random_tensor({5, 8}, 42);
  Tensor a = contract("ik,kj->ij", l, r);
  ImplicitOperator op({a}, {"rc"}, "r", "c");
  SvdTriple t = randomized_svd(op, {5, 1e-14}, {2, -1, 7});
  Tensor rec = assemble(t.u, t.s, t.v);
  CHECK(rel_err(rec, a) < 1e-8);
}

TEST_CASE("randomized svd is deterministic for a fixed seed") {
  Tensor a = random_tensor({16, 16}, 51);
  ImplicitOperator op({a}, {"rc"}, "r", "c");
  SvdTriple t1 = randomized_svd(op, {6, 1e-14}, {2, -1, 99});
  SvdTriple t2 = randomized_svd(op, {6, 1e-14}, {2, -1, 99});
  CHECK(t1.u.allclose(t2.u, 0.0));
  CHECK(t1.v.allclose(t2.v, 0.0));
}

TEST_CASE("randomized svd stays within 1.25x of the optimal truncation") {
  Tensor a = random_tensor({32, 32}, 61);
  SvdResult full = svd(a, 1);
  double opt = 0.0;
  for (std::size_t i = 8; i < full.s.size(); ++i) opt += full.s[i] * full.s[i];
  opt = std::sqrt(opt);
  ImplicitOperator op({a}, {"rc"}, "r", "c");
  SvdTriple t = randomized_svd(op, {8, 1e-14}, {2, -1, 7});
  Tensor rec = assemble(t.u, t.s, t.v);
  double err = (rec - a).frobenius_norm();
  CHECK(err <= 1.25 * opt);
}

TEST_CASE("randomized svd error is non-increasing in the iteration count") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor a = random_tensor({24, 24}, 700 + seed);
    ImplicitOperator op({a}, {"rc"}, "r", "c");
    double prev = 1e300;
    for (int k = 0; k <= 3; ++k) {
      SvdTriple t = randomized_svd(op, {6, 1e-14}, {k, -1, 7});
      double err = (assemble(t.u, t.s, t.v) - a).frobenius_norm();
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("randomized svd clamps an over-large rank request") {
  Tensor a = random_tensor({4, 6}, 71);
  ImplicitOperator op({a}, {"rc"}, "r", "c");
  SvdTriple t = randomized_svd(op, {32, 1e-14}, {1, -1, 5});
  CHECK(t.rank_clamped);
  CHECK(t.s.size() <= 4);
}

TEST_CASE("einsumsvd of the identity with full rank is exact") {
  Tensor eye = Tensor::eye(4);
  ImplicitOperator net({eye}, {"rc"}, "r", "c");
  EinsumsvdResult r = einsumsvd(net, {4, 1e-14}, SvdStrategy::exact);
  Tensor rec = contract("rk,kc->rc", r.t1, r.t2);
  CHECK((rec - eye).max_abs() < 1e-12);
}

TEST_CASE("einsumsvd implicit matches exact on a 5-tensor network") {
  // Chain of 5 tensors contracted into a two-site split, full rank.
  Tensor t1 = random_tensor({2, 3}, 81);       // (r1, m1)
  Tensor t2 = random_tensor({3, 2, 4}, 82);    // (m1, r2, m2)
  Tensor t3 = random_tensor({4, 5}, 83);       // (m2, m3)
  Tensor t4 = random_tensor({5, 3, 2}, 84);    // (m3, c1, m4)
  Tensor t5 = random_tensor({2, 3}, 85);       // (m4, c2)
  std::vector<Tensor> ts{t1, t2, t3, t4, t5};
  std::vector<std::string> ls{"ab", "bcd", "de", "efg", "gh"};
  ImplicitOperator net(ts, ls, "ac", "fh");

  EinsumsvdResult ex = einsumsvd(net, {4, 1e-14}, SvdStrategy::exact);
  EinsumsvdResult im = einsumsvd(net, {4, 1e-14}, SvdStrategy::implicit_rsvd, Absorb::split,
                                 {2, -1, 3});
  Tensor want = net.materialize();
  Tensor rec_ex = contract("rk,kc->rc", ex.t1.reshape({4, ex.s.size()}),
                           ex.t2.reshape({ex.s.size(), 9}));
  Tensor rec_im = contract("rk,kc->rc", im.t1.reshape({4, im.s.size()}),
                           im.t2.reshape({im.s.size(), 9}));
  CHECK(rel_err(rec_ex, want.reshape({4, 9})) < 1e-10);
  CHECK(rel_err(rec_im, want.reshape({4, 9})) < 1e-8);
}

TEST_CASE("einsumsvd truncation error matches the singular tail") {
  // Merge-and-truncate with m below the full rank.
  Tensor a = random_tensor({6, 4}, 91);
  Tensor b = random_tensor({4, 6}, 92);
  ImplicitOperator net({a, b}, {"rm", "mc"}, "r", "c");
  Tensor full = net.materialize();
  SvdResult fs = svd(full, 1);
  const std::size_t m = 2;
  double tail = 0.0;
  for (std::size_t i = m; i < fs.s.size(); ++i) tail += fs.s[i] * fs.s[i];
  tail = std::sqrt(tail);

  EinsumsvdResult ex = einsumsvd(net, {m, 1e-14}, SvdStrategy::exact);
  double err_ex = (contract("rk,kc->rc", ex.t1, ex.t2) - full).frobenius_norm();
  CHECK(err_ex == doctest::Approx(tail).epsilon(1e-10));

  EinsumsvdResult im = einsumsvd(net, {m, 1e-14}, SvdStrategy::implicit_rsvd, Absorb::split,
                                 {2, -1, 5});
  double err_im = (contract("rk,kc->rc", im.t1, im.t2) - full).frobenius_norm();
  CHECK(err_im <= tail * 1.10);
}

TEST_CASE("einsumsvd bond never exceeds the policy cap") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor a = random_tensor({4, 5, 3}, 900 + seed);
    Tensor b = random_tensor({3, 4, 5}, 950 + seed);
    ImplicitOperator net({a, b}, {"abm", "mcd"}, "ab", "cd");
    for (std::size_t m : {1ul, 2ul, 7ul}) {
      for (auto strat : {SvdStrategy::exact, SvdStrategy::implicit_rsvd}) {
        EinsumsvdResult r = einsumsvd(net, {m, 1e-14}, strat, Absorb::split, {1, -1, seed});
        CHECK(r.t1.extent(r.t1.order() - 1) <= m);
        CHECK(r.t1.extent(r.t1.order() - 1) >= 1);
        for (auto v : r.t1.data()) CHECK(std::isfinite(std::abs(v)));
        for (auto v : r.t2.data()) CHECK(std::isfinite(std::abs(v)));
      }
    }
  }
}

TEST_CASE("implicit einsumsvd error within 1.25x of exact at equal rank") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor a = random_tensor({8, 6}, 1100 + seed);
    Tensor b = random_tensor({6, 8}, 1150 + seed);
    ImplicitOperator net({a, b}, {"rm", "mc"}, "r", "c");
    Tensor full = net.materialize();
    const std::size_t m = 3;
    EinsumsvdResult ex = einsumsvd(net, {m, 1e-14}, SvdStrategy::exact);
    EinsumsvdResult im =
        einsumsvd(net, {m, 1e-14}, SvdStrategy::implicit_rsvd, Absorb::split, {2, -1, seed});
    double err_ex = (contract("rk,kc->rc", ex.t1, ex.t2) - full).frobenius_norm();
    double err_im = (contract("rk,kc->rc", im.t1, im.t2) - full).frobenius_norm();
    CHECK(err_im <= 1.25 * err_ex + 1e-12);
  }
}

TEST_CASE("absorb direction controls where singular weights go") {
  Tensor a = random_tensor({4, 4}, 3);
  ImplicitOperator net({a}, {"rc"}, "r", "c");
  EinsumsvdResult left = einsumsvd(net, {4, 1e-14}, SvdStrategy::exact, Absorb::left);
  EinsumsvdResult right = einsumsvd(net, {4, 1e-14}, SvdStrategy::exact, Absorb::right);
  // With weights on one side, the other factor is an isometry.
  Tensor v_iso = contract("kc,lc->kl", right.t1.conj(), right.t1);
  CHECK((v_iso - Tensor::eye(4)).max_abs() < 1e-12);
  Tensor u_iso = contract("kc,lc->kl", left.t2, left.t2.conj());
  CHECK((u_iso - Tensor::eye(4)).max_abs() < 1e-12);
  // Both reconstruct identically.
  Tensor rl = contract("rk,kc->rc", left.t1, left.t2);
  Tensor rr = contract("rk,kc->rc", right.t1, right.t2);
  CHECK((rl - rr).max_abs() < 1e-12);
}
