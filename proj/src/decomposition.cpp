#include "peps/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/linalg.hpp"

namespace peps {

namespace decomp_detail {

std::size_t effective_oversample(const RsvdConfig& cfg, std::size_t target) {
  if (cfg.oversample >= 0) return static_cast<std::size_t>(cfg.oversample);
  return std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(target))));
}

std::size_t retained_rank(const std::vector<double>& s, const TruncationPolicy& policy) {
  if (s.empty()) return 0;
  double floor = policy.rel_cutoff * s[0];
  std::size_t above = 0;
  for (double v : s) {
    if (v >= floor) ++above;  // a zero cutoff keeps zero singular values
  }
  std::size_t cap = policy.max_rank == 0 ? s.size() : policy.max_rank;
  return std::max<std::size_t>(1, std::min(above, cap));
}

Tensor scale_last_axis(const Tensor& t, const std::vector<double>& weights) {
  const std::size_t k = t.extent(t.order() - 1);
  if (weights.size() != k) throw ShapeError("weight length mismatch on last axis");
  Tensor out = t;
  auto d = out.data();
  const std::size_t lead = t.size() / k;
  for (std::size_t i = 0; i < lead; ++i) {
    for (std::size_t j = 0; j < k; ++j) d[i * k + j] *= weights[j];
  }
  return out;
}

Tensor scale_first_axis(const Tensor& t, const std::vector<double>& weights) {
  const std::size_t k = t.extent(0);
  if (weights.size() != k) throw ShapeError("weight length mismatch on first axis");
  Tensor out = t;
  auto d = out.data();
  const std::size_t trail = t.size() / k;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < trail; ++i) d[j * trail + i] *= weights[j];
  }
  return out;
}

Tensor slice_last_axis(const Tensor& t, std::size_t k) {
  const std::size_t old = t.extent(t.order() - 1);
  if (k == old) return t;
  if (k > old) throw ShapeError("slice beyond axis extent");
  Shape shape = t.shape();
  shape.back() = k;
  Tensor out(shape);
  const std::size_t lead = t.size() / old;
  for (std::size_t i = 0; i < lead; ++i) {
    for (std::size_t j = 0; j < k; ++j) out.data()[i * k + j] = t.data()[i * old + j];
  }
  return out;
}

Tensor slice_first_axis(const Tensor& t, std::size_t k) {
  const std::size_t old = t.extent(0);
  if (k == old) return t;
  if (k > old) throw ShapeError("slice beyond axis extent");
  Shape shape = t.shape();
  shape.front() = k;
  const std::size_t trail = t.size() / old;
  std::vector<cplx> data(t.data().begin(), t.data().begin() + k * trail);
  return Tensor(shape, std::move(data));
}

}  // namespace decomp_detail

using namespace decomp_detail;

namespace {

/// Orthonormal completion for columns flagged deficient: deterministic
/// Gram-Schmidt of canonical basis vectors against the existing columns.
void complete_deficient_columns(std::vector<cplx>& q, std::size_t rows, std::size_t cols,
                                const std::vector<bool>& deficient) {
  std::size_t next_basis = 0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (!deficient[j]) continue;
    for (; next_basis <= rows; ++next_basis) {
      if (next_basis == rows) throw NumericalError("orthonormal completion exhausted basis");
      std::vector<cplx> v(rows, 0.0);
      v[next_basis] = 1.0;
      for (std::size_t pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (c == j || (deficient[c] && c > j)) continue;
          cplx proj = 0.0;
          for (std::size_t r = 0; r < rows; ++r) proj += std::conj(q[r * cols + c]) * v[r];
          for (std::size_t r = 0; r < rows; ++r) v[r] -= proj * q[r * cols + c];
        }
      }
      double nrm = 0.0;
      for (const auto& x : v) nrm += std::norm(x);
      nrm = std::sqrt(nrm);
      if (nrm > 0.1) {
        for (std::size_t r = 0; r < rows; ++r) q[r * cols + j] = v[r] / nrm;
        ++next_basis;
        break;
      }
    }
  }
}

constexpr double kGramClamp = 1e-12;

/// Shared Gram-route finish: given G = A^H A (flattened cols x cols) and a
/// callable applying A to a (col..., cols) block, produce Q and R.
struct GramFactors {
  std::vector<double> inv_sqrt;   // column scalings of X for P
  Tensor p;                       // (cols, cols) matrix, P = X diag(1/sqrt(l))
  Tensor r;                       // (cols, cols) matrix, R = sqrt(l) X^H
  std::vector<bool> deficient;
};

GramFactors gram_factors(const Tensor& g_matrix) {
  EighResult eg = eigh(g_matrix);
  const std::size_t n = g_matrix.extent(0);
  double lmax = eg.values.empty() ? 0.0 : eg.values[0];
  if (lmax <= 0.0) throw NumericalError("gram orthogonalization of a zero operator");
  GramFactors f;
  f.deficient.assign(n, false);
  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) {
    double clamped = std::max(eg.values[i], kGramClamp * lmax);
    f.deficient[i] = eg.values[i] < kGramClamp * lmax;
    lam[i] = clamped;
  }
  std::vector<double> sq(n), isq(n);
  for (std::size_t i = 0; i < n; ++i) {
    sq[i] = std::sqrt(lam[i]);
    isq[i] = 1.0 / sq[i];
  }
  f.p = scale_last_axis(eg.vectors, isq);
  // R = sqrt(L) X^H: row i = sq[i] * conj(column i of X).
  Tensor r({n, n});
  auto x = eg.vectors.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n; ++c) r.data()[i * n + c] = sq[i] * std::conj(x[c * n + i]);
  }
  f.r = std::move(r);
  f.inv_sqrt = std::move(isq);
  return f;
}

}  // namespace

std::pair<Tensor, Tensor> gram_orthogonalize(const Tensor& a, std::size_t split) {
  if (split < 1 || split >= a.order()) throw ShapeError("gram split must satisfy 1 <= split < order");
  std::size_t rows = 1, cols = 1;
  Shape row_shape, col_shape;
  for (std::size_t ax = 0; ax < a.order(); ++ax) {
    if (ax < split) {
      rows *= a.extent(ax);
      row_shape.push_back(a.extent(ax));
    } else {
      cols *= a.extent(ax);
      col_shape.push_back(a.extent(ax));
    }
  }
  if (rows < cols) throw ShapeError("gram orthogonalization needs row extent >= col extent");

  Tensor mat = a.reshape({rows, cols});
  Tensor g = contract("rc,rd->cd", mat.conj(), mat);
  GramFactors f = gram_factors(g);
  Tensor q = contract("rc,cd->rd", mat, f.p);
  auto qd = q.data();
  bool any_deficient = false;
  for (bool b : f.deficient) any_deficient |= b;
  if (any_deficient) {
    std::vector<cplx> buf(qd.begin(), qd.end());
    complete_deficient_columns(buf, rows, cols, f.deficient);
    std::copy(buf.begin(), buf.end(), qd.begin());
  }

  Shape q_shape = row_shape;
  for (std::size_t e : col_shape) q_shape.push_back(e);
  Shape r_shape = col_shape;
  for (std::size_t e : col_shape) r_shape.push_back(e);
  return {q.reshape(q_shape), f.r.reshape(r_shape)};
}

std::pair<Tensor, Tensor> gram_orthogonalize(const ImplicitOperator& a) {
  // G = A^H A without materializing A: contract the conjugated copy of the
  // network against the original, sharing only the row labels.
  std::vector<Tensor> net;
  std::vector<std::string> lbl;
  std::string avail;
  for (char c = '0'; c <= '9'; ++c) avail += c;
  for (char c = 'A'; c <= 'Z'; ++c) avail += c;
  for (char c = 'a'; c <= 'z'; ++c) avail += c;
  std::string used;
  for (const auto& l : a.labels()) used += l;
  std::string pool;
  for (char c : avail) {
    if (used.find(c) == std::string::npos) pool += c;
  }
  // Rename every non-row label in the conjugated copy.
  std::string rename_from, rename_to;
  std::size_t pi = 0;
  auto renamed = [&](char c) {
    if (a.row_labels().find(c) != std::string::npos) return c;
    auto pos = rename_from.find(c);
    if (pos != std::string::npos) return rename_to[pos];
    if (pi >= pool.size()) throw ShapeError("label pool exhausted");
    rename_from += c;
    rename_to += pool[pi];
    return pool[pi++];
  };
  for (std::size_t t = 0; t < a.tensors().size(); ++t) {
    std::string rl;
    for (char c : a.labels()[t]) rl += renamed(c);
    net.push_back(a.tensors()[t].conj());
    lbl.push_back(rl);
  }
  std::string col_renamed;
  for (char c : a.col_labels()) col_renamed += renamed(c);
  for (std::size_t t = 0; t < a.tensors().size(); ++t) {
    net.push_back(a.tensors()[t]);
    lbl.push_back(a.labels()[t]);
  }
  Tensor g = detail::contract_network(std::move(net), std::move(lbl), col_renamed + a.col_labels());
  const std::size_t cols = a.col_extent();
  GramFactors f = gram_factors(g.reshape({cols, cols}));

  Shape p_shape = a.col_shape();
  p_shape.push_back(cols);
  Tensor q = a.apply(f.p.reshape(p_shape));

  bool any_deficient = false;
  for (bool b : f.deficient) any_deficient |= b;
  if (any_deficient) {
    Tensor qm = q.reshape({a.row_extent(), cols});
    std::vector<cplx> buf(qm.data().begin(), qm.data().end());
    complete_deficient_columns(buf, a.row_extent(), cols, f.deficient);
    std::copy(buf.begin(), buf.end(), qm.data().begin());
    q = qm;
  }

  Shape q_shape = a.row_shape();
  for (std::size_t e : a.col_shape()) q_shape.push_back(e);
  Shape r_shape = a.col_shape();
  for (std::size_t e : a.col_shape()) r_shape.push_back(e);
  return {q.reshape(q_shape), f.r.reshape(r_shape)};
}

SvdTriple randomized_svd(const ImplicitOperator& op, const TruncationPolicy& policy,
                         const RsvdConfig& cfg) {
  if (policy.max_rank < 1) throw ValidationError("randomized svd needs target rank >= 1");
  const std::size_t mindim = std::min(op.row_extent(), op.col_extent());
  const std::size_t target = std::min<std::size_t>(policy.max_rank, mindim);
  const bool clamped = policy.max_rank > mindim;
  const std::size_t probe = std::min(target + effective_oversample(cfg, target), mindim);

  Shape q_shape = op.col_shape();
  q_shape.push_back(probe);
  Tensor q = random_tensor(q_shape, cfg.seed);
  instr::record_intermediate(q.size());

  auto orth = [&](const Tensor& t) {
    return gram_orthogonalize(t, t.order() - 1).first;
  };

  Tensor p = orth(op.apply(q));
  for (int i = 0; i < cfg.power_iters; ++i) {
    q = orth(op.adjoint_apply(p));
    p = orth(op.apply(q));
  }

  // B = P* A = conj(A* P) with the probe axis moved to the front.
  Tensor apb = op.adjoint_apply(p).conj();
  std::vector<std::size_t> perm(apb.order());
  perm[0] = apb.order() - 1;
  for (std::size_t i = 1; i < perm.size(); ++i) perm[i] = i - 1;
  Tensor b = apb.permute(std::span<const std::size_t>(perm));

  SvdResult inner = svd(std::move(b), 1);
  Tensor u = contract("rp,pk->rk", p.reshape({op.row_extent(), probe}),
                      inner.u.reshape({probe, inner.s.size()}));

  std::size_t rank = retained_rank(inner.s, policy);
  rank = std::min(rank, target);
  std::vector<double> s(inner.s.begin(), inner.s.begin() + rank);

  Shape u_shape = op.row_shape();
  u_shape.push_back(rank);
  Shape v_shape;
  v_shape.push_back(rank);
  for (std::size_t e : op.col_shape()) v_shape.push_back(e);

  Tensor u_cut = slice_last_axis(u.reshape({op.row_extent(), inner.s.size()}), rank);
  Tensor v_cut = slice_first_axis(inner.v.reshape({inner.s.size(), op.col_extent()}), rank);
  return SvdTriple{u_cut.reshape(u_shape), std::move(s), v_cut.reshape(v_shape), clamped};
}

EinsumsvdResult einsumsvd(const ImplicitOperator& network, const TruncationPolicy& policy,
                          SvdStrategy strategy, Absorb absorb, const RsvdConfig& cfg) {
  if (network.row_labels().empty() || network.col_labels().empty()) {
    throw ShapeError("einsumsvd needs non-empty row and column groups");
  }
  instr::EinsumsvdScope scope;

  Tensor u, v;
  std::vector<double> s;
  bool clamped = false;
  if (strategy == SvdStrategy::exact) {
    Tensor t = network.materialize();
    SvdResult full = svd(std::move(t), network.row_shape().size());
    std::size_t rank = retained_rank(full.s, policy);
    s.assign(full.s.begin(), full.s.begin() + rank);
    u = slice_last_axis(full.u, rank);
    v = slice_first_axis(full.v, rank);
    clamped = policy.max_rank > std::min(network.row_extent(), network.col_extent());
  } else {
    SvdTriple tri = randomized_svd(network, policy, cfg);
    u = std::move(tri.u);
    v = std::move(tri.v);
    s = std::move(tri.s);
    clamped = tri.rank_clamped;
  }

  std::vector<double> wl(s.size(), 1.0), wr(s.size(), 1.0);
  switch (absorb) {
    case Absorb::split:
      for (std::size_t i = 0; i < s.size(); ++i) wl[i] = wr[i] = std::sqrt(s[i]);
      break;
    case Absorb::left:
      wl.assign(s.begin(), s.end());
      break;
    case Absorb::right:
      wr.assign(s.begin(), s.end());
      break;
  }
  EinsumsvdResult out;
  out.t1 = scale_last_axis(u, wl);
  out.t2 = scale_first_axis(v, wr);
  out.s = std::move(s);
  out.rank_clamped = clamped;
  return out;
}

}  // namespace peps
