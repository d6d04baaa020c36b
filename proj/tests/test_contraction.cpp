#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "doctest.h"
#include "peps/contraction.hpp"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/linalg.hpp"
#include "peps/rng.hpp"
#include "peps/state.hpp"
#include "peps/statevector.hpp"

using namespace peps;

namespace {

/// Brute-force oracle: sums the one-layer network by enumerating every bond
/// assignment.
cplx loop_contract_grid(const OneLayerGrid& g) {
  // Assign an id to every edge.
  struct Edge {
    std::size_t extent;
  };
  const std::size_t R = g.rows(), C = g.cols();
  auto h_edge = [&](std::size_t r, std::size_t c) { return r * (C - 1) + c; };  // (r,c)-(r,c+1)
  const std::size_t n_h = R * (C - 1);
  auto v_edge = [&](std::size_t r, std::size_t c) { return n_h + r * C + c; };  // (r,c)-(r+1,c)
  const std::size_t n_edges = n_h + (R - 1) * C;

  std::vector<std::size_t> extent(n_edges, 1);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c + 1 < C; ++c) extent[h_edge(r, c)] = g.site(r, c).extent(3);
  }
  for (std::size_t r = 0; r + 1 < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) extent[v_edge(r, c)] = g.site(r, c).extent(2);
  }

  std::vector<std::size_t> idx(n_edges, 0);
  cplx total = 0.0;
  while (true) {
    cplx prod = 1.0;
    for (std::size_t r = 0; r < R && prod != cplx(0.0); ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t u = r == 0 ? 0 : idx[v_edge(r - 1, c)];
        std::size_t l = c == 0 ? 0 : idx[h_edge(r, c - 1)];
        std::size_t d = r + 1 == R ? 0 : idx[v_edge(r, c)];
        std::size_t rt = c + 1 == C ? 0 : idx[h_edge(r, c)];
        prod *= g.site(r, c).at({u, l, d, rt});
      }
    }
    total += prod;
    std::size_t e = 0;
    for (; e < n_edges; ++e) {
      if (++idx[e] < extent[e]) break;
      idx[e] = 0;
    }
    if (e == n_edges) break;
  }
  return total;
}

PepsState random_peps_state(std::size_t rows, std::size_t cols, std::size_t gates,
                            std::uint64_t seed, std::size_t rank = SIZE_MAX) {
  std::vector<int> zeros(rows * cols, 0);
  PepsState s = PepsState::computational_basis(rows, cols, zeros);
  SplitMix64 gen(seed);
  UpdateOption opt;
  opt.policy.max_rank = rank;
  for (std::size_t i = 0; i < gates; ++i) {
    std::size_t r = gen.next_u64() % rows, c = gen.next_u64() % cols;
    QrResult qres = qr(random_tensor({4, 4}, gen.next_u64()), 1);
    Tensor g = qres.q.reshape({2, 2, 2, 2});
    std::vector<Coord> nb;
    if (c + 1 < cols) nb.push_back({r, c + 1});
    if (r + 1 < rows) nb.push_back({r + 1, c});
    if (nb.empty()) continue;
    s = apply_two_site(s, g, {r, c}, nb[gen.next_u64() % nb.size()], opt);
  }
  return s;
}

/// Two rounds of random two-site gates on every neighbor pair; with the rank
/// cap this saturates interior bonds at the cap.
PepsState saturated_state(std::size_t rows, std::size_t cols, std::uint64_t seed,
                          std::size_t rank) {
  std::vector<int> zeros(rows * cols, 0);
  PepsState s = PepsState::computational_basis(rows, cols, zeros);
  SplitMix64 gen(seed);
  UpdateOption opt;
  opt.policy.max_rank = rank;
  for (int round = 0; round < 2; ++round) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c + 1 < cols; ++c) {
        Tensor g = qr(random_tensor({4, 4}, gen.next_u64()), 1).q.reshape({2, 2, 2, 2});
        s = apply_two_site(s, g, {r, c}, {r, c + 1}, opt);
      }
    }
    for (std::size_t r = 0; r + 1 < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        Tensor g = qr(random_tensor({4, 4}, gen.next_u64()), 1).q.reshape({2, 2, 2, 2});
        s = apply_two_site(s, g, {r, c}, {r + 1, c}, opt);
      }
    }
  }
  return s;
}

}  // namespace

TEST_CASE("exact contraction of an all-ones bond-1 grid is 1") {
  std::vector<Tensor> sites;
  for (int i = 0; i < 4; ++i) {
    Tensor t({1, 1, 1, 1});
    t.data()[0] = 1.0;
    sites.push_back(t);
  }
  OneLayerGrid g(2, 2, sites);
  CHECK(std::abs(contract_exact(g) - cplx(1, 0)) < 1e-15);
}

TEST_CASE("exact contraction matches a single einsum over all sites") {
  OneLayerGrid g = OneLayerGrid::random(3, 3, 2, 17);
  // Labels: vertical bond (r,c): 'a'+..., horizontal: 'A'+...
  std::vector<std::string> labels(9);
  auto vch = [](std::size_t r, std::size_t c) { return static_cast<char>('a' + r * 3 + c); };
  auto hch = [](std::size_t r, std::size_t c) { return static_cast<char>('A' + r * 3 + c); };
  std::vector<Tensor> tensors;
  std::string dummy = "0123456789!?";
  std::size_t dummy_i = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::string l;
      l += r == 0 ? dummy[dummy_i++] : vch(r - 1, c);
      l += c == 0 ? dummy[dummy_i++] : hch(r, c - 1);
      l += r == 2 ? dummy[dummy_i++] : vch(r, c);
      l += c == 2 ? dummy[dummy_i++] : hch(r, c);
      labels[r * 3 + c] = l;
      tensors.push_back(g.site(r, c));
    }
  }
  cplx want = detail::contract_network(tensors, labels, "").scalar_value();
  cplx got = contract_exact(g);
  CHECK(std::abs(got - want) < 1e-12 * std::abs(want));
}

TEST_CASE("exact contraction matches the nested-loop oracle on 4x4") {
  OneLayerGrid g = OneLayerGrid::random(4, 4, 2, 23);
  cplx want = loop_contract_grid(g);
  cplx got = contract_exact(g);
  CHECK(std::abs(got - want) < 1e-10 * std::abs(want));
}

TEST_CASE("exact contraction refuses when over budget") {
  OneLayerGrid g = OneLayerGrid::random(4, 4, 4, 29);
  CHECK_THROWS_AS(contract_exact(g, 64), ResourceError);
  try {
    contract_exact(g, 64);
  } catch (const ResourceError& e) {
    CHECK(e.required_elements > 64);
  }
}

TEST_CASE("approx MPO application: identity MPO is exact") {
  // Random MPS of bond 3, phys 2; identity MPO of bond 1.
  Mps s;
  s.sites.push_back(random_tensor({2, 1, 3}, 1));
  s.sites.push_back(random_tensor({2, 3, 3}, 2));
  s.sites.push_back(random_tensor({2, 3, 1}, 3));
  Mpo id;
  for (int i = 0; i < 3; ++i) {
    Tensor t({2, 2, 1, 1});
    t.at({0, 0, 0, 0}) = 1.0;
    t.at({1, 1, 0, 0}) = 1.0;
    id.sites.push_back(t);
  }
  ApplyOption opt;
  opt.policy = {8, 1e-14};
  Mps out = approx_apply_mpo(s, id, opt);
  cplx ratio = mps_overlap(out, s) / mps_overlap(s, s);
  CHECK(std::abs(ratio - cplx(1, 0)) < 1e-12);
  CHECK(std::abs(std::abs(mps_overlap(out, out) / mps_overlap(s, s)) - 1.0) < 1e-12);
}

TEST_CASE("approx MPO application reproduces the exact product at full rank") {
  Mps s;
  s.sites.push_back(random_tensor({2, 1, 3}, 11));
  s.sites.push_back(random_tensor({2, 3, 3}, 12));
  s.sites.push_back(random_tensor({2, 3, 3}, 13));
  s.sites.push_back(random_tensor({2, 3, 1}, 14));
  Mpo o;
  o.sites.push_back(random_tensor({2, 2, 1, 2}, 15));
  o.sites.push_back(random_tensor({2, 2, 2, 2}, 16));
  o.sites.push_back(random_tensor({2, 2, 2, 2}, 17));
  o.sites.push_back(random_tensor({2, 2, 2, 1}, 18));

  Mps exact = exact_apply_mpo(s, o);
  ApplyOption opt;
  opt.policy = {6, 1e-14};
  Mps approx = approx_apply_mpo(s, o, opt);
  cplx xx = mps_overlap(exact, exact), aa = mps_overlap(approx, approx),
       xa = mps_overlap(exact, approx);
  // Relative distance ||exact - approx||^2 / ||exact||^2.
  double dist = std::abs(xx + aa - 2.0 * xa.real()) / std::abs(xx);
  CHECK(dist < 1e-9);
}

TEST_CASE("approx MPO truncation error tracks the optimal tail") {
  Mps s;
  s.sites.push_back(random_tensor({2, 1, 3}, 21));
  s.sites.push_back(random_tensor({2, 3, 3}, 22));
  s.sites.push_back(random_tensor({2, 3, 3}, 23));
  s.sites.push_back(random_tensor({2, 3, 1}, 24));
  Mpo o;
  o.sites.push_back(random_tensor({2, 2, 1, 2}, 25));
  o.sites.push_back(random_tensor({2, 2, 2, 2}, 26));
  o.sites.push_back(random_tensor({2, 2, 2, 2}, 27));
  o.sites.push_back(random_tensor({2, 2, 2, 1}, 28));

  Mps exact = exact_apply_mpo(s, o);
  // Optimal rank-3 truncation error at the centre cut of the materialized
  // product state.
  Tensor full = contract("pab,qbc->pqac", exact.sites[0].permute({1, 0, 2}).reshape({2, 1, 3 * 2}),
                         Tensor::eye(1));
  // Materialize the full product state amplitude tensor instead.
  Tensor amp = contract("alr,bro->ablo", exact.sites[0].permute({0, 1, 2}),
                        exact.sites[1].permute({0, 1, 2}));
  amp = amp.reshape({4, exact.sites[1].extent(2)});
  Tensor amp2 = contract("pr,arq->paq", amp, exact.sites[2]);
  amp2 = amp2.reshape({8, exact.sites[2].extent(2)});
  Tensor amp3 = contract("pr,arq->paq", amp2, exact.sites[3]);
  Tensor psi = amp3.reshape({16});

  SvdResult mid = svd(psi.reshape({4, 4}), 1);
  double tail2 = 0.0;
  for (std::size_t i = 3; i < mid.s.size(); ++i) tail2 += mid.s[i] * mid.s[i];

  ApplyOption opt;
  opt.policy = {3, 1e-14};
  opt.absorb = Absorb::right;
  Mps approx = approx_apply_mpo(s, o, opt);
  cplx xx = mps_overlap(exact, exact), aa = mps_overlap(approx, approx),
       xa = mps_overlap(exact, approx);
  double err2 = std::abs(xx + aa - 2.0 * xa.real());
  // The zip-up truncates three cuts; its error should stay within 15% of the
  // single-cut optimum plus cross terms.
  CHECK(err2 <= (tail2 + 1e-12) * 1.15 * 3.0);
}

TEST_CASE("bmps and ibmps match exact contraction with ample m") {
  OneLayerGrid g = OneLayerGrid::random(3, 3, 2, 31);
  cplx want = contract_exact(g);
  cplx bm = contract_one_layer(g, ContractOption::bmps_opt(8, 5));
  CHECK(std::abs(bm - want) < 1e-9 * std::abs(want));
  cplx ib = contract_one_layer(g, ContractOption::ibmps_opt(8, 5));
  CHECK(std::abs(ib - want) < 1e-7 * std::abs(want));
}

TEST_CASE("bond-1 grids contract exactly at m = 1") {
  OneLayerGrid g = OneLayerGrid::random(3, 4, 1, 37);
  cplx want = contract_exact(g);
  cplx bm = contract_one_layer(g, ContractOption::bmps_opt(1, 0));
  CHECK(std::abs(bm - want) < 1e-12 * std::abs(want));
}

TEST_CASE("ibmps is deterministic for a fixed seed") {
  OneLayerGrid g = OneLayerGrid::random(3, 3, 3, 41);
  ContractOption opt = ContractOption::ibmps_opt(4, 99);
  cplx a = contract_one_layer(g, opt);
  cplx b = contract_one_layer(g, opt);
  CHECK(a.real() == b.real());
  CHECK(a.imag() == b.imag());
}

TEST_CASE("error is monotone in m and ibmps tracks bmps") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    OneLayerGrid g = OneLayerGrid::random(4, 4, 3, 100 + seed);
    cplx want = contract_exact(g);
    double prev_b = 1e300, prev_i = 1e300;
    for (std::size_t m : {2ul, 4ul, 9ul, 16ul}) {
      double err_b = std::abs(contract_one_layer(g, ContractOption::bmps_opt(m, seed)) - want) /
                     std::abs(want);
      double err_i = std::abs(contract_one_layer(g, ContractOption::ibmps_opt(m, seed)) - want) /
                     std::abs(want);
      CHECK(err_b <= prev_b + 1e-10);
      CHECK(err_i <= prev_i + 1e-10);
      CHECK(err_i <= 1.25 * err_b + 1e-10);
      prev_b = err_b;
      prev_i = err_i;
    }
    // With m at the exact growth bound both families are exact.
    CHECK(prev_b < 1e-7);
    CHECK(prev_i < 1e-7);
  }
}

TEST_CASE("transposed grids contract to the same value") {
  OneLayerGrid g = OneLayerGrid::random(3, 4, 2, 51);
  OneLayerGrid t = g.transposed();
  cplx a = contract_exact(g);
  cplx b = contract_exact(t);
  CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
  cplx ab = contract_one_layer(g, ContractOption::bmps_opt(8, 1));
  cplx bb = contract_one_layer(t, ContractOption::bmps_opt(8, 1));
  CHECK(std::abs(ab - bb) < 1e-9 * std::abs(ab));
}

TEST_CASE("ibmps peak intermediate is below bmps peak") {
  OneLayerGrid g = OneLayerGrid::random(4, 4, 4, 61);
  for (std::size_t m : {4ul, 8ul}) {
    instr::reset();
    contract_one_layer(g, ContractOption::bmps_opt(m, 3));
    std::uint64_t peak_b = instr::peak_elements();
    instr::reset();
    contract_one_layer(g, ContractOption::ibmps_opt(m, 3));
    std::uint64_t peak_i = instr::peak_elements();
    INFO("m=", m, " bmps=", peak_b, " ibmps=", peak_i);
    CHECK(peak_i < peak_b);
  }
}

TEST_CASE("einsumsvd flop growth per m-doubling: bmps fast, ibmps slow") {
  OneLayerGrid g = OneLayerGrid::random(4, 4, 8, 71);
  std::map<std::size_t, std::uint64_t> fl_b, fl_i;
  for (std::size_t m : {8ul, 16ul, 32ul}) {
    instr::reset();
    contract_one_layer(g, ContractOption::bmps_opt(m, 3));
    fl_b[m] = instr::einsumsvd_flops();
    instr::reset();
    contract_one_layer(g, ContractOption::ibmps_opt(m, 3));
    fl_i[m] = instr::einsumsvd_flops();
  }
  double growth_b = static_cast<double>(fl_b[32]) / static_cast<double>(fl_b[16]);
  double growth_i = static_cast<double>(fl_i[32]) / static_cast<double>(fl_i[16]);
  INFO("bmps growth ", growth_b, " ibmps growth ", growth_i);
  CHECK(growth_b >= 6.9);
  CHECK(growth_i <= 4.6);
}

TEST_CASE("two-layer contraction of a basis state gives 1") {
  std::vector<int> zeros(9, 0);
  PepsState s = PepsState::computational_basis(3, 3, zeros);
  cplx v = contract_two_layer(s, s, ContractOption::two_layer_opt(4, 1));
  CHECK(std::abs(v - cplx(1, 0)) < 1e-12);
}

TEST_CASE("two-layer inner product matches the statevector") {
  PepsState a = random_peps_state(3, 3, 6, 81);
  PepsState b = random_peps_state(3, 3, 6, 82);
  cplx want = sv_inner(from_peps(a), from_peps(b));
  cplx got = contract_two_layer(a, b, ContractOption::two_layer_opt(16, 7));
  CHECK(std::abs(got - want) < 1e-7 * std::abs(want));
}

TEST_CASE("two-layer route agrees with the merged one-layer route") {
  PepsState s = saturated_state(4, 4, 91, 4);
  ContractOption merged = ContractOption::ibmps_opt(16, 3);
  cplx one_layer = contract_one_layer(merge_two_layer(s, s), merged);
  cplx two_layer = contract_two_layer(s, s, ContractOption::two_layer_opt(16, 3));
  CHECK(std::abs(two_layer - one_layer) < 1e-7 * std::abs(one_layer));
}

TEST_CASE("two-layer contraction never materializes merged sites") {
  PepsState s = saturated_state(4, 4, 101, 4);
  // Merged interior site would have r^8 elements (r = per-layer bond).
  std::uint64_t merged_site = 1;
  for (int i = 0; i < 4; ++i) merged_site *= 16;  // bond 4 squared per edge
  REQUIRE(s.max_bond() == 4);
  instr::reset();
  contract_two_layer(s, s, ContractOption::two_layer_opt(8, 5));
  CHECK(instr::peak_elements() < merged_site);
}

TEST_CASE("band values reproduce full contractions") {
  PepsState s = random_peps_state(3, 3, 6, 111);
  ContractOption opt = ContractOption::two_layer_opt(16, 9);

  TwoLayerBoundary top = two_layer_first_row(s, s);

  // No insertions: the band of rows 1..2 under the row-0 boundary is <psi|psi>.
  cplx norm2 = contract_two_layer(s, s, opt);
  cplx plain = band_value(&top, s, s, 1, 2, nullptr, {});
  CHECK(std::abs(plain - norm2) < 1e-7 * std::abs(norm2));

  // One-site insertion matches the statevector numerator <psi|Z_4|psi>.
  StateVector sv = from_peps(s);
  StateVector zs = apply_gate(sv, gates::Z(), 4);
  cplx want = sv_inner(sv, zs);
  std::vector<InsertionPiece> pieces{{Coord{1, 1}, gates::Z(), {}}};
  cplx got = band_value(&top, s, s, 1, 2, nullptr, pieces);
  CHECK(std::abs(got - want) < 1e-6 * std::abs(norm2));

  // Two-site horizontal insertion via a split operator with a gate bond.
  Tensor xz = gates::two_site(gates::X(), gates::Z());
  StateVector xs = apply_gate(sv, xz, 3, 4);
  cplx want2 = sv_inner(sv, xs);
  SvdResult sp = svd(xz.permute({0, 2, 1, 3}), 2);
  std::vector<double> w(sp.s.begin(), sp.s.end());
  for (auto& x : w) x = std::sqrt(x);
  Tensor left = decomp_detail::scale_last_axis(sp.u, w);
  Tensor right = decomp_detail::scale_first_axis(sp.v, w).permute({1, 2, 0});
  std::vector<InsertionPiece> p2{{Coord{1, 0}, left, {0}}, {Coord{1, 1}, right, {0}}};
  cplx got2 = band_value(&top, s, s, 1, 2, nullptr, p2);
  CHECK(std::abs(got2 - want2) < 1e-6 * std::abs(norm2));

  // Environments splice to the same values.
  BandEnvironment env = band_environment(&top, s, s, 1, 2, nullptr);
  cplx spliced = band_splice(env, &top, s, s, nullptr, pieces, 1, 1);
  CHECK(std::abs(spliced - got) < 1e-9 * std::abs(norm2));
  cplx spliced2 = band_splice(env, &top, s, s, nullptr, p2, 0, 1);
  CHECK(std::abs(spliced2 - got2) < 1e-9 * std::abs(norm2));
}

TEST_CASE("contract report carries family, flops and value") {
  OneLayerGrid g = OneLayerGrid::random(3, 3, 2, 121);
  ContractionReport rep;
  instr::reset();
  cplx v = contract_one_layer(g, ContractOption::ibmps_opt(4, 11), &rep);
  CHECK(rep.family == "ibmps");
  CHECK(rep.m == 4);
  CHECK(rep.flops > 0);
  CHECK(rep.peak_intermediate_elements > 0);
  CHECK(rep.value_re == v.real());
  CHECK(rep.seed == 11);
  CHECK(rep.to_json().find("\"family\":\"ibmps\"") != std::string::npos);
}
