#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/linalg.hpp"
#include "peps/observables.hpp"
#include "peps/state.hpp"
#include "peps/statevector.hpp"
#include "peps/tensor.hpp"

using namespace peps;

namespace {

std::vector<int> bits_of(std::initializer_list<int> b) { return std::vector<int>(b); }

/// Random 2-qubit unitary from the QR of a random matrix.
Tensor random_unitary4(std::uint64_t seed) {
  Tensor a = random_tensor({4, 4}, seed);
  QrResult r = qr(a, 1);
  return r.q.reshape({2, 2, 2, 2});
}

}  // namespace

TEST_CASE("X flips a basis qubit") {
  StateVector sv = StateVector::basis(2, bits_of({0, 0}));
  StateVector out = apply_gate(sv, gates::X(), 0);
  CHECK(std::abs(out.amplitude(bits_of({1, 0})) - cplx(1, 0)) < 1e-15);
}

TEST_CASE("CNOT maps |10> to |11>") {
  StateVector sv = StateVector::basis(2, bits_of({1, 0}));
  StateVector out = apply_gate(sv, gates::CNOT(), 0, 1);
  CHECK(std::abs(out.amplitude(bits_of({1, 1})) - cplx(1, 0)) < 1e-15);
}

TEST_CASE("two-qubit gate equals the dense matrix on the embedded subspace") {
  Tensor u = random_unitary4(7);
  StateVector sv(3, [] {
    std::vector<cplx> a(8);
    for (std::size_t i = 0; i < 8; ++i) a[i] = cplx(0.1 * double(i + 1), -0.05 * double(i));
    return a;
  }());
  StateVector out = apply_gate(sv, u, 0, 2);
  // Oracle: explicit sum over the 4x4 matrix acting on qubits (0, 2).
  for (std::size_t i = 0; i < 8; ++i) {
    int b0 = (i >> 2) & 1, b1 = (i >> 1) & 1, b2 = i & 1;
    cplx want = 0.0;
    for (int j0 = 0; j0 < 2; ++j0) {
      for (int j2 = 0; j2 < 2; ++j2) {
        std::size_t src = (std::size_t(j0) << 2) | (std::size_t(b1) << 1) | std::size_t(j2);
        want += u.at({std::size_t(b0), std::size_t(b2), std::size_t(j0), std::size_t(j2)}) *
                sv.amps()[src];
      }
    }
    CHECK(std::abs(out.amps()[i] - want) < 1e-13);
  }
}

TEST_CASE("unitary gates preserve the norm") {
  StateVector sv = StateVector::basis(4, bits_of({0, 1, 0, 0}));
  sv = apply_gate(sv, gates::H(), 0);
  sv = apply_gate(sv, gates::sqrtY(), 2);
  sv = apply_gate(sv, gates::ISWAP(), 1, 3);
  sv = apply_gate(sv, random_unitary4(3), 0, 2);
  CHECK(std::abs(sv.norm() - 1.0) < 1e-13);
}

TEST_CASE("sqrt gates square to their generators") {
  for (auto [sq, full] : {std::pair{gates::sqrtX(), gates::X()}, {gates::sqrtY(), gates::Y()}}) {
    Tensor prod = contract("ij,jk->ik", sq, sq);
    CHECK((prod - full).max_abs() < 1e-14);
  }
  Tensor w2 = contract("ij,jk->ik", gates::sqrtW(), gates::sqrtW());
  Tensor x = gates::X(), y = gates::Y();
  Tensor w({2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    w.data()[i] = (x.data()[i] + y.data()[i]) / std::sqrt(2.0);
  }
  CHECK((w2 - w).max_abs() < 1e-14);
}

TEST_CASE("ite on a single -Z field reaches the ground state") {
  Observable obs;
  obs.add(-1.0, {0, 0}, gates::Z());
  StateVector plus(1, {cplx(1 / std::sqrt(2.0), 0), cplx(1 / std::sqrt(2.0), 0)});
  IteResult r = exact_ite(plus, obs, 1, 0.2, 80, IteMode::trotter);
  CHECK(r.energies.back() == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(std::abs(r.state.amplitude(bits_of({0}))) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("2x2 J1-J2 ite converges to the dense ground energy") {
  Observable obs = build_j1j2(2, 2, {1, 1, 1}, {0.5, 0.5, 0.5}, {0.2, 0.2, 0.2});
  // Two diagonal pairs exist on 2x2: terms = 12 + 6 + 12.
  CHECK(obs.size() == 30);

  Tensor h = dense_hamiltonian(obs, 2, 2);
  EighResult e = eigh(h);
  double ground = e.values.back();

  // Trotterized evolution carries an O(tau) state bias (quadratic in the
  // energy), so anneal tau downward.
  StateVector init = StateVector::basis(4, bits_of({0, 1, 1, 0}));
  IteResult r = exact_ite(init, obs, 2, 0.05, 300, IteMode::trotter);
  r = exact_ite(r.state, obs, 2, 0.01, 2000, IteMode::trotter);
  r = exact_ite(r.state, obs, 2, 0.002, 10000, IteMode::trotter);
  r = exact_ite(r.state, obs, 2, 0.0005, 20000, IteMode::trotter);
  CHECK(std::abs(r.energies.back() - ground) < 2e-5);

  IteResult rd = exact_ite(init, obs, 2, 0.05, 400, IteMode::dense);
  CHECK(rd.energies.back() == doctest::Approx(ground).epsilon(1e-9));
  CHECK(std::abs(rd.energies.back() - ground) < 1e-6);
  // Dense-exponential evolution has a monotone energy trace.
  for (std::size_t i = 1; i < rd.energies.size(); ++i) {
    CHECK(rd.energies[i] <= rd.energies[i - 1] + 1e-10);
  }
}

TEST_CASE("from_peps maps a basis PEPS to a basis vector") {
  auto bits = std::vector<int>(9, 0);
  PepsState s = PepsState::computational_basis(3, 3, bits);
  StateVector sv = from_peps(s);
  CHECK(sv.dim() == 512);
  CHECK(std::abs(sv.amps()[0] - cplx(1, 0)) < 1e-15);
  double rest = 0;
  for (std::size_t i = 1; i < 512; ++i) rest += std::abs(sv.amps()[i]);
  CHECK(rest == 0.0);
}

TEST_CASE("from_peps on an entangled state matches gate-level evolution") {
  std::vector<int> zeros(4, 0);
  PepsState s = PepsState::computational_basis(2, 2, zeros);
  s = apply_one_site(s, gates::H(), {0, 0});
  UpdateOption ample;
  s = apply_two_site(s, gates::CNOT(), {0, 0}, {0, 1}, ample);
  s = apply_two_site(s, gates::ISWAP(), {0, 1}, {1, 1}, ample);

  StateVector sv = StateVector::basis(4, zeros);
  sv = apply_gate(sv, gates::H(), 0);
  sv = apply_gate(sv, gates::CNOT(), 0, 1);
  sv = apply_gate(sv, gates::ISWAP(), 1, 3);

  StateVector got = from_peps(s);
  cplx overlap = sv_inner(sv, got);
  CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("zero-padded bonds do not change the materialized vector") {
  std::vector<int> bits{0, 1, 1, 0};
  PepsState s = PepsState::computational_basis(2, 2, bits);
  StateVector a = from_peps(s);
  CHECK(std::abs(a.amplitude(bits) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(a.amplitude(bits_of({0, 0, 0, 0}))) == 0.0);
}

TEST_CASE("from_peps refuses when over budget") {
  std::vector<int> bits(9, 0);
  PepsState s = PepsState::computational_basis(3, 3, bits);
  CHECK_THROWS_AS(from_peps(s, 256), ResourceError);
}

TEST_CASE("sv expectation of simple observables") {
  Observable zsum;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) zsum.add(1.0, {r, c}, gates::Z());
  }
  StateVector sv = StateVector::basis(4, bits_of({0, 0, 0, 0}));
  CHECK(sv_expectation(sv, zsum, 2).value == doctest::Approx(4.0));
  StateVector sv2 = StateVector::basis(4, bits_of({0, 1, 0, 0}));
  CHECK(sv_expectation(sv2, zsum, 2).value == doctest::Approx(2.0));
}
