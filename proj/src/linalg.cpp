#include "peps/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "peps/errors.hpp"
#include "peps/instrument.hpp"

namespace peps {

namespace {

using lp_cplx = lapack_complex_double;

lp_cplx* lp(cplx* p) { return reinterpret_cast<lp_cplx*>(p); }

struct MatShape {
  std::size_t rows, cols;
  Shape row_shape, col_shape;
};

MatShape matricize(const Shape& shape, std::size_t split) {
  if (split > shape.size()) throw ShapeError("split exceeds tensor order");
  MatShape m;
  m.rows = 1;
  m.cols = 1;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (a < split) {
      m.rows *= shape[a];
      m.row_shape.push_back(shape[a]);
    } else {
      m.cols *= shape[a];
      m.col_shape.push_back(shape[a]);
    }
  }
  return m;
}

/// Fixes the phase of column j of u (rows x k, row-major) so its
/// largest-magnitude entry is real positive; v (k x cols) rows compensate.
void fix_column_phases(std::vector<cplx>& u, std::size_t rows, std::size_t k, std::vector<cplx>* v,
                       std::size_t cols) {
  for (std::size_t j = 0; j < k; ++j) {
    double best = 0.0;
    cplx top = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      double a = std::abs(u[i * k + j]);
      if (a > best) {
        best = a;
        top = u[i * k + j];
      }
    }
    if (best == 0.0) continue;
    cplx phase = top / best;
    cplx fix = std::conj(phase);
    for (std::size_t i = 0; i < rows; ++i) u[i * k + j] *= fix;
    if (v) {
      for (std::size_t c = 0; c < cols; ++c) (*v)[j * cols + c] *= phase;
    }
  }
}

void gesdd_rowmajor(std::vector<cplx>& a, std::size_t rows, std::size_t cols, std::vector<cplx>& u,
                    std::vector<double>& s, std::vector<cplx>& vt, const Shape& shape) {
  const std::size_t k = std::min(rows, cols);
  u.assign(rows * k, 0.0);
  s.assign(k, 0.0);
  vt.assign(k * cols, 0.0);
  int info = LAPACKE_zgesdd(LAPACK_ROW_MAJOR, 'S', static_cast<lapack_int>(rows),
                            static_cast<lapack_int>(cols), lp(a.data()), static_cast<lapack_int>(cols),
                            s.data(), lp(u.data()), static_cast<lapack_int>(k), lp(vt.data()),
                            static_cast<lapack_int>(cols));
  if (info != 0) {
    throw NumericalError("SVD failed to converge (info=" + std::to_string(info) + ") on tensor " +
                         shape_to_string(shape));
  }
}

/// SVD of a wide row-major matrix (rows <= cols) via Householder QR of the
/// adjoint followed by a small square SVD.  A row-major rows*cols buffer is
/// the col-major buffer of the transpose, so building A^H in column-major
/// form costs one elementwise conjugation.  Backward stable, and much faster
/// than bidiagonalizing the full wide matrix.
void wide_svd(std::vector<cplx> a, std::size_t rows, std::size_t cols, std::vector<cplx>& u,
              std::vector<double>& s, std::vector<cplx>& vt, const Shape& shape) {
  const std::size_t k = rows;
  for (auto& x : a) x = std::conj(x);
  // a now holds A^H, col-major (cols x rows), lda = cols.
  std::vector<cplx> tau(k);
  int info = LAPACKE_zgeqrf(LAPACK_COL_MAJOR, static_cast<lapack_int>(cols),
                            static_cast<lapack_int>(rows), lp(a.data()), static_cast<lapack_int>(cols),
                            lp(tau.data()));
  if (info != 0) throw NumericalError("QR stage of SVD failed on tensor " + shape_to_string(shape));

  // A = T^H Q^H with T upper triangular (rows x rows): G = T^H, row-major.
  std::vector<cplx> g(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      g[i * rows + j] = std::conj(a[i * cols + j]);  // T(j,i) at col-major [i*cols + j]
    }
  }
  std::vector<cplx> gu, gvt;
  gesdd_rowmajor(g, rows, rows, gu, s, gvt, shape);

  // V^H = Q gvt^H: apply Q's reflectors to [gvt^H; 0] (col-major cols x k).
  std::vector<cplx> d(cols * k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < rows; ++i) {
      d[j * cols + i] = std::conj(gvt[j * rows + i]);  // gvt^H(i,j) = conj(gvt(j,i))
    }
  }
  info = LAPACKE_zunmqr(LAPACK_COL_MAJOR, 'L', 'N', static_cast<lapack_int>(cols),
                        static_cast<lapack_int>(k), static_cast<lapack_int>(k), lp(a.data()),
                        static_cast<lapack_int>(cols), lp(tau.data()), lp(d.data()),
                        static_cast<lapack_int>(cols));
  if (info != 0) throw NumericalError("Q application failed in SVD on tensor " + shape_to_string(shape));

  // V = D^H; the row-major k*cols view of d's buffer is D^T, so conjugate.
  vt = std::move(d);
  for (auto& x : vt) x = std::conj(x);
  u = std::move(gu);
}

void svd_dispatch(std::vector<cplx> a, std::size_t rows, std::size_t cols, std::vector<cplx>& u,
                  std::vector<double>& s, std::vector<cplx>& vt, const Shape& shape) {
  constexpr std::size_t kRouteMin = 1u << 20;
  if (cols >= 2 * rows && rows * cols >= kRouteMin) {
    wide_svd(std::move(a), rows, cols, u, s, vt, shape);
  } else if (rows >= 2 * cols && rows * cols >= kRouteMin) {
    // SVD of A^H through the wide route, then swap factors.
    std::vector<cplx> b(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) b[j * rows + i] = std::conj(a[i * cols + j]);
    }
    a.clear();
    a.shrink_to_fit();
    std::vector<cplx> ub, vb;
    wide_svd(std::move(b), cols, rows, ub, s, vb, shape);
    const std::size_t k = cols;
    u.assign(rows * k, 0.0);
    vt.assign(k * cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < k; ++j) u[r * k + j] = std::conj(vb[j * rows + r]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < cols; ++c) vt[j * cols + c] = std::conj(ub[c * k + j]);
    }
  } else {
    gesdd_rowmajor(a, rows, cols, u, s, vt, shape);
  }
  instr::add_flops(linalg_detail::svd_flops(rows, cols));
  fix_column_phases(u, rows, std::min(rows, cols), &vt, cols);
}

SvdResult svd_impl(std::vector<cplx> data, const Shape& shape, std::size_t split) {
  MatShape m = matricize(shape, split);
  std::vector<cplx> u, vt;
  std::vector<double> s;
  svd_dispatch(std::move(data), m.rows, m.cols, u, s, vt, shape);
  const std::size_t k = std::min(m.rows, m.cols);
  Shape u_shape = m.row_shape;
  u_shape.push_back(k);
  Shape v_shape;
  v_shape.push_back(k);
  for (std::size_t e : m.col_shape) v_shape.push_back(e);
  SvdResult out{Tensor(u_shape, std::move(u)), std::move(s), Tensor(v_shape, std::move(vt))};
  instr::record_intermediate(out.u.size());
  instr::record_intermediate(out.v.size());
  return out;
}

}  // namespace

namespace linalg_detail {

std::uint64_t svd_flops(std::size_t rows, std::size_t cols) {
  std::uint64_t mn = std::min(rows, cols), mx = std::max(rows, cols);
  return 14 * mn * mn * mx + 8 * mn * mn * mn;
}

std::uint64_t qr_flops(std::size_t rows, std::size_t cols) {
  return 4 * cols * cols * rows;
}

std::uint64_t eigh_flops(std::size_t n) { return 9 * n * n * n; }

}  // namespace linalg_detail

SvdResult svd(const Tensor& t, std::size_t split) {
  if (split < 1 || split >= t.order()) {
    throw ShapeError("svd split must satisfy 1 <= split < order");
  }
  return svd_impl(std::vector<cplx>(t.data().begin(), t.data().end()), t.shape(), split);
}

SvdResult svd(Tensor&& t, std::size_t split) {
  if (split < 1 || split >= t.order()) {
    throw ShapeError("svd split must satisfy 1 <= split < order");
  }
  Shape shape = t.shape();
  std::vector<cplx> data(t.data().begin(), t.data().end());
  t = Tensor();
  return svd_impl(std::move(data), shape, split);
}

QrResult qr(const Tensor& t, std::size_t split) {
  if (split < 1 || split >= t.order()) {
    throw ShapeError("qr split must satisfy 1 <= split < order");
  }
  MatShape m = matricize(t.shape(), split);
  if (m.rows < m.cols) {
    throw ShapeError("thin QR needs row extent >= col extent, got " + std::to_string(m.rows) + " x " +
                     std::to_string(m.cols));
  }
  std::vector<cplx> a(t.data().begin(), t.data().end());
  std::vector<cplx> tau(m.cols);
  int info = LAPACKE_zgeqrf(LAPACK_ROW_MAJOR, static_cast<lapack_int>(m.rows),
                            static_cast<lapack_int>(m.cols), lp(a.data()),
                            static_cast<lapack_int>(m.cols), lp(tau.data()));
  if (info != 0) throw NumericalError("QR factorization failed on tensor " + shape_to_string(t.shape()));

  std::vector<cplx> r(m.cols * m.cols, 0.0);
  for (std::size_t i = 0; i < m.cols; ++i) {
    for (std::size_t j = i; j < m.cols; ++j) r[i * m.cols + j] = a[i * m.cols + j];
  }
  info = LAPACKE_zungqr(LAPACK_ROW_MAJOR, static_cast<lapack_int>(m.rows),
                        static_cast<lapack_int>(m.cols), static_cast<lapack_int>(m.cols), lp(a.data()),
                        static_cast<lapack_int>(m.cols), lp(tau.data()));
  if (info != 0) throw NumericalError("Q formation failed on tensor " + shape_to_string(t.shape()));
  instr::add_flops(linalg_detail::qr_flops(m.rows, m.cols));

  // Make diag(r) real non-negative: scale column j of q by phase, row j of r
  // by its conjugate.
  for (std::size_t j = 0; j < m.cols; ++j) {
    cplx d = r[j * m.cols + j];
    double ad = std::abs(d);
    if (ad == 0.0) continue;
    cplx phase = d / ad;
    for (std::size_t c = j; c < m.cols; ++c) r[j * m.cols + c] *= std::conj(phase);
    for (std::size_t i = 0; i < m.rows; ++i) a[i * m.cols + j] *= phase;
  }

  Shape q_shape = m.row_shape;
  q_shape.push_back(m.cols);
  Shape r_shape;
  r_shape.push_back(m.cols);
  for (std::size_t e : m.col_shape) r_shape.push_back(e);
  QrResult out{Tensor(q_shape, std::move(a)), Tensor(r_shape, std::move(r))};
  instr::record_intermediate(out.q.size());
  return out;
}

EighResult eigh(const Tensor& m) {
  if (m.order() != 2 || m.extent(0) != m.extent(1)) {
    throw ShapeError("eigh expects a square matrix, got " + shape_to_string(m.shape()));
  }
  const std::size_t n = m.extent(0);
  auto d = m.data();
  double scale = m.max_abs();
  double herm_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      herm_err = std::max(herm_err, std::abs(d[i * n + j] - std::conj(d[j * n + i])));
    }
  }
  if (herm_err > 1e-10 * std::max(1.0, scale)) {
    throw ValidationError("matrix is not Hermitian within tolerance (deviation " +
                          std::to_string(herm_err) + ")");
  }

  std::vector<cplx> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a[i * n + j] = 0.5 * (d[i * n + j] + std::conj(d[j * n + i]));
    }
  }
  std::vector<double> w(n);
  int info = LAPACKE_zheevd(LAPACK_ROW_MAJOR, 'V', 'U', static_cast<lapack_int>(n), lp(a.data()),
                            static_cast<lapack_int>(n), w.data());
  if (info != 0) throw NumericalError("eigendecomposition failed (info=" + std::to_string(info) + ")");
  instr::add_flops(linalg_detail::eigh_flops(n));

  // LAPACK sorts ascending; flip to descending, columns follow.
  std::vector<cplx> vec(n * n);
  std::vector<double> values(n);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = w[n - 1 - j];
    for (std::size_t i = 0; i < n; ++i) vec[i * n + j] = a[i * n + (n - 1 - j)];
  }
  fix_column_phases(vec, n, n, nullptr, 0);
  return EighResult{std::move(values), Tensor({n, n}, std::move(vec))};
}

Tensor hermitian_function(const Tensor& m, const std::function<double(double)>& f) {
  EighResult e = eigh(m);
  const std::size_t n = m.extent(0);
  // X f(L) X^H
  Tensor out({n, n});
  auto x = e.vectors.data();
  for (std::size_t j = 0; j < n; ++j) {
    double fj = f(e.values[j]);
    for (std::size_t r = 0; r < n; ++r) {
      cplx xr = x[r * n + j] * fj;
      for (std::size_t c = 0; c < n; ++c) {
        out.data()[r * n + c] += xr * std::conj(x[c * n + j]);
      }
    }
  }
  instr::add_flops(2 * n * n * n);
  return out;
}

}  // namespace peps
