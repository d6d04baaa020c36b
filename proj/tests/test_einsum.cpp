#include <complex>
#include <map>
#include <vector>

#include "doctest.h"
#include "peps/backend.hpp"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/tensor.hpp"

using namespace peps;

namespace {

/// Independent oracle: naive nested-loop evaluation of a contraction spec by
/// enumerating every assignment of every label.
Tensor loop_contract(const ContractionSpec& spec, const std::vector<Tensor>& tensors) {
  std::map<char, std::size_t> ext;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t a = 0; a < spec.inputs[t].size(); ++a) {
      ext[spec.inputs[t][a]] = tensors[t].extent(a);
    }
  }
  std::string all_labels;
  for (auto& [c, e] : ext) all_labels += c;

  Shape out_shape;
  for (char c : spec.output) out_shape.push_back(ext[c]);
  Tensor out = out_shape.empty() ? Tensor::scalar(0.0) : Tensor::zeros(out_shape);

  std::map<char, std::size_t> idx;
  for (char c : all_labels) idx[c] = 0;
  while (true) {
    cplx prod(1.0, 0.0);
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      std::vector<std::size_t> ti;
      for (char c : spec.inputs[t]) ti.push_back(idx[c]);
      prod *= tensors[t](ti);
    }
    std::vector<std::size_t> oi;
    for (char c : spec.output) oi.push_back(idx[c]);
    if (oi.empty()) {
      out.data()[0] += prod;
    } else {
      out(oi) += prod;
    }
    // advance odometer
    std::size_t a = 0;
    for (; a < all_labels.size(); ++a) {
      char c = all_labels[a];
      if (++idx[c] < ext[c]) break;
      idx[c] = 0;
    }
    if (a == all_labels.size()) break;
  }
  return out;
}

}  // namespace

TEST_CASE("identity matrix product") {
  Tensor eye = Tensor::eye(2);
  Tensor r = contract("ij,jk->ik", eye, eye);
  CHECK(r.allclose(Tensor::eye(2), 1e-15));
}

TEST_CASE("trace of identity") {
  Tensor r = contract("ii->", Tensor::eye(3));
  CHECK(r.scalar_value() == cplx(3.0, 0.0));
}

TEST_CASE("abc,cd->abd matches nested-loop oracle") {
  Tensor a = random_tensor({2, 3, 4}, 5);
  Tensor b = random_tensor({4, 2}, 6);
  Tensor got = contract("abc,cd->abd", a, b);
  Tensor want = loop_contract(ContractionSpec::parse("abc,cd->abd"), {a, b});
  CHECK(got.shape() == Shape{2, 3, 2});
  CHECK((got - want).max_abs() < 1e-13);
}

TEST_CASE("multilinearity in each argument") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor a = random_tensor({3, 4}, seed * 10 + 1);
    Tensor b = random_tensor({3, 4}, seed * 10 + 2);
    Tensor c = random_tensor({4, 5}, seed * 10 + 3);
    cplx alpha(0.7, -0.2), beta(-1.3, 0.4);
    Tensor lhs = contract("ij,jk->ik", a * alpha + b * beta, c);
    Tensor rhs = contract("ij,jk->ik", a, c) * alpha + contract("ij,jk->ik", b, c) * beta;
    CHECK((lhs - rhs).max_abs() < 1e-12);
  }
}

TEST_CASE("random networks of up to 4 tensors match the oracle") {
  struct Net {
    const char* spec;
    std::vector<Shape> shapes;
  };
  std::vector<Net> nets = {
      {"ab,bc,cd->ad", {{3, 4}, {4, 5}, {5, 2}}},
      {"ab,bc,ca->", {{3, 4}, {4, 5}, {5, 3}}},
      {"abc,bd,ce->ade", {{2, 3, 4}, {3, 5}, {4, 2}}},
      {"ab,ab->", {{4, 6}, {4, 6}}},
      {"ij,jk,kl,li->", {{2, 3}, {3, 4}, {4, 5}, {5, 2}}},
      {"abc,adc,bd->", {{2, 3, 4}, {2, 5, 4}, {3, 5}}},
      {"pq,qr->rp", {{3, 3}, {3, 3}}},
      {"aab->b", {{3, 3, 4}}},
      {"ab,cd->abcd", {{2, 3}, {4, 2}}},  // outer product, repeated extents
  };
  std::uint64_t seed = 100;
  for (const auto& net : nets) {
    auto spec = ContractionSpec::parse(net.spec);
    std::vector<Tensor> tensors;
    for (const auto& sh : net.shapes) tensors.push_back(random_tensor(sh, seed++));
    Tensor got = contract(spec, tensors);
    Tensor want = loop_contract(spec, tensors);
    INFO("spec ", net.spec);
    CHECK(got.same_shape(want));
    double scale = std::max(1.0, want.max_abs());
    CHECK((got - want).max_abs() / scale < 1e-12);
  }
}

TEST_CASE("label extent mismatch names the offending label") {
  Tensor a = random_tensor({2, 3}, 1);
  Tensor b = random_tensor({4, 2}, 2);
  CHECK_THROWS_WITH_AS(contract("ij,jk->ik", a, b), doctest::Contains("'j'"), ShapeError);
}

TEST_CASE("output label must appear in an input") {
  Tensor a = random_tensor({2, 2}, 1);
  CHECK_THROWS_AS(contract("ij->ik", a), ShapeError);
}

TEST_CASE("pairwise flop accounting is 2 * product of extents") {
  instr::reset();
  Tensor a = random_tensor({3, 4}, 1);
  Tensor b = random_tensor({4, 5}, 2);
  contract("ij,jk->ik", a, b);
  CHECK(instr::flops() == 2ull * 3 * 4 * 5);
  CHECK(instr::peak_elements() >= 15);
}

TEST_CASE("strict deterministic mode gives identical results") {
  Backend strict;
  strict.strict_deterministic = true;
  set_backend(strict);
  Tensor a = random_tensor({6, 7}, 3);
  Tensor b = random_tensor({7, 8}, 4);
  Tensor r1 = contract("ij,jk->ik", a, b);
  set_backend(Backend{});
  Tensor r2 = contract("ij,jk->ik", a, b);
  CHECK((r1 - r2).max_abs() < 1e-13);
}
