#include <cmath>
#include <complex>

#include "doctest.h"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/linalg.hpp"
#include "peps/tensor.hpp"

using namespace peps;

namespace {

Tensor reconstruct_svd(const SvdResult& r, std::size_t split) {
  // Fold u * diag(s) * v back together.
  Tensor us = r.u;
  const std::size_t k = r.s.size();
  auto d = us.data();
  const std::size_t lead = us.size() / k;
  for (std::size_t i = 0; i < lead; ++i) {
    for (std::size_t j = 0; j < k; ++j) d[i * k + j] *= r.s[j];
  }
  std::size_t rows = us.size() / k;
  std::size_t cols = r.v.size() / k;
  Tensor m = contract("ik,kj->ij", us.reshape({rows, k}), r.v.reshape({k, cols}));
  (void)split;
  return m;
}

Tensor random_hermitian(std::size_t n, std::uint64_t seed) {
  Tensor a = random_tensor({n, n}, seed);
  Tensor h = (a + a.conj().permute({1, 0})) * 0.5;
  return h;
}

}  // namespace

TEST_CASE("svd of a diagonal matrix returns its diagonal") {
  Tensor d({3, 3});
  d.at({0, 0}) = 3.0;
  d.at({1, 1}) = 2.0;
  d.at({2, 2}) = 1.0;
  SvdResult r = svd(d, 1);
  REQUIRE(r.s.size() == 3);
  CHECK(r.s[0] == doctest::Approx(3.0));
  CHECK(r.s[1] == doctest::Approx(2.0));
  CHECK(r.s[2] == doctest::Approx(1.0));
}

TEST_CASE("rank-1 outer product has one singular value") {
  Tensor u = random_tensor({5}, 2);
  Tensor v = random_tensor({4}, 3);
  double nu = u.frobenius_norm(), nv = v.frobenius_norm();
  for (auto& x : u.data()) x /= nu;
  for (auto& x : v.data()) x /= nv;
  Tensor m = contract("i,j->ij", u, v);
  SvdResult r = svd(m, 1);
  CHECK(r.s[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < r.s.size(); ++i) CHECK(r.s[i] < 1e-12);
}

TEST_CASE("svd reconstructs a random order-3 tensor") {
  Tensor t = random_tensor({4, 3, 2}, 9);
  SvdResult r = svd(t, 1);
  Tensor m = reconstruct_svd(r, 1);
  Tensor orig = t.reshape({4, 6});
  CHECK((m - orig).frobenius_norm() / orig.frobenius_norm() < 1e-12);
  // Singular values are non-negative and non-increasing; zeros are kept.
  CHECK(r.s.size() == 4);
  for (std::size_t i = 0; i + 1 < r.s.size(); ++i) CHECK(r.s[i] >= r.s[i + 1]);
}

TEST_CASE("svd reconstruction bound on 100 random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Shape shape{2 + seed % 3, 3, 2 + (seed / 3) % 2};
    Tensor t = random_tensor(shape, 1000 + seed);
    SvdResult r = svd(t, 1);
    Tensor m = reconstruct_svd(r, 1);
    Tensor orig = t.reshape({shape[0], shape[1] * shape[2]});
    CHECK((m - orig).frobenius_norm() / orig.frobenius_norm() < 1e-12);
  }
}

TEST_CASE("svd sign convention makes factors reproducible") {
  Tensor t = random_tensor({5, 4}, 77);
  SvdResult a = svd(t, 1);
  SvdResult b = svd(t, 1);
  CHECK(a.u.allclose(b.u, 0.0));
  // Largest-magnitude entry of each left singular vector is real positive.
  const std::size_t k = a.s.size();
  for (std::size_t j = 0; j < k; ++j) {
    double best = 0;
    cplx top;
    for (std::size_t i = 0; i < 5; ++i) {
      if (std::abs(a.u.at({i, j})) > best) {
        best = std::abs(a.u.at({i, j}));
        top = a.u.at({i, j});
      }
    }
    CHECK(std::abs(top.imag()) < 1e-12 * best);
    CHECK(top.real() > 0);
  }
}

TEST_CASE("wide and tall svd routes agree with the direct kernel") {
  // Large enough to trigger the QR-preconditioned path.
  Tensor wide = random_tensor({32, 40000}, 5);
  SvdResult r = svd(wide, 1);
  Tensor m = reconstruct_svd(r, 1);
  CHECK((m - wide).frobenius_norm() / wide.frobenius_norm() < 1e-12);
  // Isometry of u.
  Tensor utu = contract("ik,il->kl", r.u.conj(), r.u);
  CHECK((utu - Tensor::eye(32)).max_abs() < 1e-12);
  // Isometry of v over its column group.
  Tensor vvt = contract("ki,li->kl", r.v, r.v.conj());
  CHECK((vvt - Tensor::eye(32)).max_abs() < 1e-12);

  Tensor tall = random_tensor({40000, 32}, 6);
  SvdResult rt = svd(tall, 1);
  Tensor mt = reconstruct_svd(rt, 1);
  CHECK((mt - tall).frobenius_norm() / tall.frobenius_norm() < 1e-12);
}

TEST_CASE("qr of identity gives identity factors") {
  Tensor eye = Tensor::eye(3);
  QrResult r = qr(eye, 1);
  CHECK(r.q.allclose(eye, 1e-14));
  CHECK(r.r.allclose(eye, 1e-14));
}

TEST_CASE("qr reconstructs and q is isometric") {
  Tensor a = random_tensor({8, 3}, 21);
  QrResult r = qr(a, 1);
  Tensor qr_prod = contract("ik,kj->ij", r.q, r.r);
  CHECK((qr_prod - a).frobenius_norm() / a.frobenius_norm() < 1e-13);
  Tensor qtq = contract("ik,il->kl", r.q.conj(), r.q);
  CHECK((qtq - Tensor::eye(3)).max_abs() < 1e-13);
}

TEST_CASE("qr on an order-5 tensor with split 4") {
  Tensor t = random_tensor({2, 2, 2, 2, 2}, 33);
  QrResult r = qr(t, 4);
  CHECK(r.q.shape() == Shape{2, 2, 2, 2, 2});
  CHECK(r.r.shape() == Shape{2, 2});
  Tensor rec = contract("abcdk,ke->abcde", r.q, r.r);
  CHECK((rec - t).frobenius_norm() / t.frobenius_norm() < 1e-12);
}

TEST_CASE("qr isometry holds on 100 random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::size_t rows = 4 + seed % 5, cols = 2 + seed % 3;
    Tensor a = random_tensor({rows, cols}, 500 + seed);
    QrResult r = qr(a, 1);
    Tensor qtq = contract("ik,il->kl", r.q.conj(), r.q);
    CHECK((qtq - Tensor::eye(cols)).max_abs() < 1e-10 * static_cast<double>(cols));
    Tensor rec = contract("ik,kj->ij", r.q, r.r);
    CHECK((rec - a).frobenius_norm() / a.frobenius_norm() < 1e-12);
  }
}

TEST_CASE("qr requires rows >= cols") {
  Tensor a = random_tensor({2, 5}, 1);
  CHECK_THROWS_AS(qr(a, 1), ShapeError);
}

TEST_CASE("eigh of diag(1,2) sorts descending") {
  Tensor d({2, 2});
  d.at({0, 0}) = 1.0;
  d.at({1, 1}) = 2.0;
  EighResult e = eigh(d);
  CHECK(e.values[0] == doctest::Approx(2.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
}

TEST_CASE("eigh of Pauli X") {
  Tensor x = Tensor::from_values({2, 2}, {0.0, 1.0, 1.0, 0.0});
  EighResult e = eigh(x);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(-1.0));
}

TEST_CASE("eigh reconstructs a random Hermitian matrix") {
  Tensor h = random_hermitian(6, 99);
  EighResult e = eigh(h);
  Tensor lx = e.vectors;
  auto d = lx.data();
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) d[i * 6 + j] *= e.values[j];
  }
  Tensor rec = contract("ik,jk->ij", lx, e.vectors.conj());
  CHECK((rec - h).frobenius_norm() < 1e-12 * std::max(1.0, h.frobenius_norm()));
}

TEST_CASE("eigh rejects non-Hermitian input") {
  Tensor a = random_tensor({4, 4}, 3);
  CHECK_THROWS_AS(eigh(a), ValidationError);
}
