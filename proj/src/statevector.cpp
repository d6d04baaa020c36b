#include "peps/statevector.hpp"

#include <algorithm>
#include <cmath>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/linalg.hpp"

namespace peps {

StateVector::StateVector(std::size_t qubits, std::vector<cplx> amps)
    : qubits_(qubits), amps_(std::move(amps)) {
  if (amps_.size() != (std::size_t(1) << qubits_)) throw ShapeError("amplitude count must be 2^N");
}

StateVector StateVector::basis(std::size_t qubits, std::span<const int> bits) {
  if (bits.size() != qubits) throw ValidationError("bit string length mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < qubits; ++k) {
    if (bits[k] < 0 || bits[k] > 1) throw ValidationError("bit out of range");
    idx = (idx << 1) | static_cast<std::size_t>(bits[k]);
  }
  std::vector<cplx> amps(std::size_t(1) << qubits, 0.0);
  amps[idx] = 1.0;
  return StateVector(qubits, std::move(amps));
}

cplx StateVector::amplitude(std::span<const int> bits) const {
  if (bits.size() != qubits_) throw ValidationError("bit string length mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < qubits_; ++k) idx = (idx << 1) | static_cast<std::size_t>(bits[k]);
  return amps_[idx];
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

void StateVector::normalize() {
  double n = norm();
  if (n == 0.0) throw NumericalError("cannot normalize the zero vector");
  for (auto& a : amps_) a /= n;
}

namespace {
std::size_t frontier_count(const Tensor& acc) { return acc.order() - 1; }
}  // namespace

StateVector from_peps(const PepsState& s, std::size_t budget_amplitudes) {
  const std::size_t n = s.qubits();
  const std::size_t dim = std::size_t(1) << n;
  if (dim > budget_amplitudes) {
    throw ResourceError("statevector needs " + std::to_string(dim) + " amplitudes, budget is " +
                            std::to_string(budget_amplitudes),
                        dim);
  }
  const std::size_t intermediate_budget = budget_amplitudes * 64;

  // Accumulator: (collected physicals flattened, frontier bonds left to
  // right).  The frontier while absorbing column c of row r is
  // [down(r,0..c-1), right(r,c-1), down(r-1,c..)].
  Tensor acc;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < s.cols(); ++c) {
      const Tensor& t = s.site(r, c);  // (d, u, l, dn, rt)
      if (r == 0 && c == 0) {
        acc = t.reshape({t.extent(0), t.extent(3), t.extent(4)});  // (P, dn, rt)
        continue;
      }
      std::string acc_labels = "P";
      for (std::size_t i = 1; i < acc.order(); ++i) acc_labels += static_cast<char>('a' + i - 1);
      auto fchar = [](std::size_t pos) { return static_cast<char>('a' + pos); };
      std::string site_labels;
      Tensor st;
      std::size_t consumed_pos;  // first consumed frontier position
      std::size_t skip;          // number of consumed frontier axes
      if (c == 0) {
        // u binds the row above; l has extent 1 and is squeezed.
        st = t.permute({0, 1, 3, 4, 2}).reshape({t.extent(0), t.extent(1), t.extent(3), t.extent(4)});
        site_labels = std::string("Q") + fchar(0) + "DR";
        consumed_pos = 0;
        skip = 1;
      } else if (r == 0) {
        // l binds the trailing right bond; u has extent 1 and is squeezed.
        st = t.permute({0, 2, 3, 4, 1}).reshape({t.extent(0), t.extent(2), t.extent(3), t.extent(4)});
        site_labels = std::string("Q") + fchar(c) + "DR";
        consumed_pos = c;
        skip = 1;
      } else {
        // (d, u, l, dn, rt): u binds frontier pos c+1, l binds pos c.
        st = t;
        site_labels = std::string("Q") + fchar(c + 1) + fchar(c) + "DR";
        consumed_pos = c;
        skip = 2;
      }
      std::string keep = "PQDR";
      for (std::size_t i = 0; i < frontier_count(acc); ++i) {
        char fc = fchar(i);
        if (site_labels.find(fc) == std::string::npos) keep += fc;
      }
      auto [res, res_labels] = detail::pairwise_contract(acc, acc_labels, st, site_labels, keep);
      if (res.size() > intermediate_budget) {
        throw ResourceError("from_peps intermediate exceeds budget", res.size());
      }

      // res: (P, surviving frontier..., Q, D, R); rebuild canonical order.
      const std::size_t frontier = acc.order() - 1;
      std::vector<std::size_t> perm;
      auto pos_of = [&](char ch) { return res_labels.find(ch); };
      perm.push_back(pos_of('P'));
      perm.push_back(pos_of('Q'));
      for (std::size_t i = 0; i < consumed_pos; ++i) perm.push_back(pos_of(fchar(i)));
      perm.push_back(pos_of('D'));
      perm.push_back(pos_of('R'));
      for (std::size_t i = consumed_pos + skip; i < frontier; ++i) perm.push_back(pos_of(fchar(i)));
      Tensor shaped = res.permute(std::span<const std::size_t>(perm));

      Shape merged;
      merged.push_back(shaped.extent(0) * shaped.extent(1));  // P * d
      for (std::size_t i = 2; i < shaped.order(); ++i) merged.push_back(shaped.extent(i));
      acc = shaped.reshape(merged);

      if (c == s.cols() - 1) {
        // Drop the trailing right bond (extent 1).
        Shape sh(acc.shape().begin(), acc.shape().end() - 1);
        acc = acc.reshape(sh);
      }
    }
  }
  // Remaining frontier bonds are the extent-1 downs of the last row.
  acc = acc.reshape({dim});
  return StateVector(n, std::vector<cplx>(acc.data().begin(), acc.data().end()));
}

StateVector apply_gate(const StateVector& sv, const Tensor& gate, std::size_t q) {
  if (q >= sv.qubits()) throw ValidationError("gate target out of range");
  if (gate.order() != 2 || gate.extent(0) != 2 || gate.extent(1) != 2) {
    throw ShapeError("one-qubit gate must be 2x2");
  }
  StateVector out = sv;
  const std::size_t stride = std::size_t(1) << (sv.qubits() - 1 - q);
  auto a = sv.amps();
  auto b = out.amps();
  const cplx g00 = gate.data()[0], g01 = gate.data()[1], g10 = gate.data()[2], g11 = gate.data()[3];
  for (std::size_t base = 0; base < sv.dim(); base += stride * 2) {
    for (std::size_t off = 0; off < stride; ++off) {
      cplx a0 = a[base + off];
      cplx a1 = a[base + off + stride];
      b[base + off] = g00 * a0 + g01 * a1;
      b[base + off + stride] = g10 * a0 + g11 * a1;
    }
  }
  return out;
}

StateVector apply_gate(const StateVector& sv, const Tensor& gate, std::size_t q1, std::size_t q2) {
  if (q1 >= sv.qubits() || q2 >= sv.qubits()) throw ValidationError("gate target out of range");
  if (q1 == q2) throw ValidationError("two-qubit gate targets must differ");
  if (gate.order() != 4) throw ShapeError("two-qubit gate must be (out,out,in,in)");
  StateVector out = sv;
  const std::size_t s1 = std::size_t(1) << (sv.qubits() - 1 - q1);
  const std::size_t s2 = std::size_t(1) << (sv.qubits() - 1 - q2);
  auto a = sv.amps();
  auto b = out.amps();
  auto g = gate.data();
  for (std::size_t i = 0; i < sv.dim(); ++i) {
    if ((i & s1) || (i & s2)) continue;
    const std::size_t i00 = i, i01 = i | s2, i10 = i | s1, i11 = i | s1 | s2;
    const cplx in[4] = {a[i00], a[i01], a[i10], a[i11]};
    const std::size_t idx[4] = {i00, i01, i10, i11};
    for (std::size_t o = 0; o < 4; ++o) {
      cplx v = 0.0;
      for (std::size_t j = 0; j < 4; ++j) v += g[o * 4 + j] * in[j];
      b[idx[o]] = v;
    }
  }
  return out;
}

cplx sv_inner(const StateVector& a, const StateVector& b) {
  if (a.qubits() != b.qubits()) throw ShapeError("qubit count mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a.amps()[i]) * b.amps()[i];
  return s;
}

namespace {

StateVector apply_term(const StateVector& sv, const LocalTerm& term, std::size_t cols,
                       const Tensor* override_op = nullptr) {
  const Tensor& op = override_op ? *override_op : term.op;
  if (term.sites.size() == 1) {
    return apply_gate(sv, op, term.sites[0].row * cols + term.sites[0].col);
  }
  return apply_gate(sv, op, term.sites[0].row * cols + term.sites[0].col,
                    term.sites[1].row * cols + term.sites[1].col);
}

}  // namespace

SvExpectation sv_expectation(const StateVector& sv, const Observable& obs, std::size_t cols) {
  SvExpectation out;
  cplx sum = 0.0;
  for (const auto& term : obs.terms()) {
    StateVector phi = apply_term(sv, term, cols);
    sum += term.coeff * sv_inner(sv, phi);
  }
  double n2 = sv.norm();
  n2 *= n2;
  out.raw_sum = sum;
  out.norm_sq = n2;
  out.value = (sum / n2).real();
  return out;
}

Tensor dense_hamiltonian(const Observable& obs, std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  if (n > 12) throw ResourceError("dense Hamiltonian limited to 12 qubits", std::size_t(1) << (2 * n));
  const std::size_t dim = std::size_t(1) << n;
  Tensor h({dim, dim});
  for (const auto& term : obs.terms()) {
    if (term.sites.size() == 1) {
      const std::size_t q = term.sites[0].row * cols + term.sites[0].col;
      const std::size_t stride = std::size_t(1) << (n - 1 - q);
      for (std::size_t i = 0; i < dim; ++i) {
        std::size_t bi = (i & stride) ? 1 : 0;
        for (std::size_t o = 0; o < 2; ++o) {
          std::size_t j = (i & ~stride) | (o ? stride : 0);
          h.at({j, i}) += term.coeff * term.op.at({o, bi});
        }
      }
    } else {
      const std::size_t q1 = term.sites[0].row * cols + term.sites[0].col;
      const std::size_t q2 = term.sites[1].row * cols + term.sites[1].col;
      const std::size_t s1 = std::size_t(1) << (n - 1 - q1);
      const std::size_t s2 = std::size_t(1) << (n - 1 - q2);
      for (std::size_t i = 0; i < dim; ++i) {
        std::size_t b1 = (i & s1) ? 1 : 0, b2 = (i & s2) ? 1 : 0;
        for (std::size_t o1 = 0; o1 < 2; ++o1) {
          for (std::size_t o2 = 0; o2 < 2; ++o2) {
            std::size_t j = (i & ~s1 & ~s2) | (o1 ? s1 : 0) | (o2 ? s2 : 0);
            h.at({j, i}) += term.coeff * term.op.at({o1, o2, b1, b2});
          }
        }
      }
    }
  }
  return h;
}

IteResult exact_ite(const StateVector& sv, const Observable& obs, std::size_t cols, double tau,
                    std::size_t steps, IteMode mode) {
  IteResult out{sv, {}};
  out.energies.reserve(steps);

  if (mode == IteMode::dense) {
    const std::size_t rows = sv.qubits() / cols;
    Tensor h = dense_hamiltonian(obs, rows, cols);
    EighResult e = eigh(h);
    const std::size_t dim = sv.dim();
    auto x = e.vectors.data();
    std::vector<cplx> coef(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      cplx sum = 0.0;
      for (std::size_t i = 0; i < dim; ++i) sum += std::conj(x[i * dim + j]) * sv.amps()[i];
      coef[j] = sum;
    }
    for (std::size_t step = 0; step < steps; ++step) {
      double nrm2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        coef[j] *= std::exp(-tau * e.values[j]);
        nrm2 += std::norm(coef[j]);
      }
      double inv = 1.0 / std::sqrt(nrm2);
      double energy = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        coef[j] *= inv;
        energy += std::norm(coef[j]) * e.values[j];
      }
      out.energies.push_back(energy);
    }
    std::vector<cplx> amps(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      cplx sum = 0.0;
      for (std::size_t j = 0; j < dim; ++j) sum += x[i * dim + j] * coef[j];
      amps[i] = sum;
    }
    out.state = StateVector(sv.qubits(), std::move(amps));
    return out;
  }

  for (std::size_t step = 0; step < steps; ++step) {
    for (const auto& term : obs.terms()) {
      Tensor local = term.sites.size() == 1
                         ? term.op * term.coeff
                         : term.op.reshape({4, 4}) * term.coeff;
      Tensor gate = hermitian_function(local, [tau](double x) { return std::exp(-tau * x); });
      if (term.sites.size() == 2) gate = gate.reshape({2, 2, 2, 2});
      out.state = apply_term(out.state, term, cols, &gate);
      out.state.normalize();
    }
    out.energies.push_back(sv_expectation(out.state, obs, cols).value);
  }
  return out;
}

}  // namespace peps
