#include "peps/state.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/linalg.hpp"

namespace peps {

PepsState::PepsState(std::size_t rows, std::size_t cols, std::size_t phys_dim,
                     std::vector<Tensor> sites)
    : rows_(rows), cols_(cols), phys_(phys_dim), sites_(std::move(sites)) {
  if (rows_ == 0 || cols_ == 0) throw ValidationError("PEPS grid must be non-empty");
  if (sites_.size() != rows_ * cols_) throw ShapeError("site count does not match grid");
  validate();
}

void PepsState::validate() const {
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const Tensor& t = site(r, c);
      if (t.order() != 5) throw ShapeError("PEPS site must be order 5");
      if (t.extent(0) != phys_) throw ShapeError("physical dimension mismatch");
      if (r == 0 && t.extent(1) != 1) throw ShapeError("top boundary bond must be 1");
      if (c == 0 && t.extent(2) != 1) throw ShapeError("left boundary bond must be 1");
      if (r == rows_ - 1 && t.extent(3) != 1) throw ShapeError("bottom boundary bond must be 1");
      if (c == cols_ - 1 && t.extent(4) != 1) throw ShapeError("right boundary bond must be 1");
      if (r + 1 < rows_ && t.extent(3) != site(r + 1, c).extent(1)) {
        throw ShapeError("vertical bond mismatch at (" + std::to_string(r) + "," + std::to_string(c) +
                         ")");
      }
      if (c + 1 < cols_ && t.extent(4) != site(r, c + 1).extent(2)) {
        throw ShapeError("horizontal bond mismatch at (" + std::to_string(r) + "," +
                         std::to_string(c) + ")");
      }
    }
  }
}

PepsState PepsState::computational_basis(std::size_t rows, std::size_t cols,
                                         std::span<const int> bits, std::size_t phys_dim) {
  if (bits.size() != rows * cols) throw ValidationError("bit string length must equal site count");
  std::vector<Tensor> sites;
  sites.reserve(rows * cols);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] < 0 || static_cast<std::size_t>(bits[i]) >= phys_dim) {
      throw ValidationError("bit value out of range at site " + std::to_string(i));
    }
    Tensor t({phys_dim, 1, 1, 1, 1});
    t.data()[static_cast<std::size_t>(bits[i])] = 1.0;
    sites.push_back(std::move(t));
  }
  return PepsState(rows, cols, phys_dim, std::move(sites));
}

std::size_t PepsState::max_bond() const {
  std::size_t m = 1;
  for (const auto& t : sites_) {
    m = std::max({m, t.extent(1), t.extent(2), t.extent(3), t.extent(4)});
  }
  return m;
}

void PepsState::check_coord(Coord a) const {
  if (a.row >= rows_ || a.col >= cols_) {
    throw ValidationError("site (" + std::to_string(a.row) + "," + std::to_string(a.col) +
                          ") outside the grid");
  }
}

PepsState apply_one_site(const PepsState& s, const Tensor& gate, Coord target) {
  s.check_coord(target);
  const std::size_t d = s.phys_dim();
  if (gate.order() != 2 || gate.extent(0) != d || gate.extent(1) != d) {
    throw ShapeError("one-site gate must be d x d");
  }
  std::vector<Tensor> sites = s.sites();
  sites[target.row * s.cols() + target.col] =
      contract("ij,juldr->iuldr", gate, s.site(target.row, target.col));
  return PepsState(s.rows(), s.cols(), d, std::move(sites));
}

namespace {

struct PairGeometry {
  // Permutation taking the site to (env axes..., phys, shared) order, and the
  // placement of (env..., out-phys, new-bond) back into site axis order.
  std::vector<std::size_t> to_env;
  std::vector<std::size_t> from_env;
};

// Axis ids: 0 phys, 1 up, 2 left, 3 down, 4 right.
PairGeometry geometry(bool first_site, bool horizontal) {
  PairGeometry g;
  if (horizontal) {
    if (first_site) {
      g.to_env = {1, 2, 3, 0, 4};    // (u, l, dn | d, right)
      g.from_env = {3, 0, 1, 2, 4};  // (u,l,dn,o,v) -> (o,u,l,dn,v)
    } else {
      g.to_env = {1, 3, 4, 0, 2};    // (u, dn, rt | d, left)
      g.from_env = {3, 0, 4, 1, 2};  // (u,dn,rt,o,v) -> (o,u,v,dn,rt)
    }
  } else {
    if (first_site) {
      g.to_env = {1, 2, 4, 0, 3};    // (u, l, rt | d, down)
      g.from_env = {3, 0, 1, 4, 2};  // (u,l,rt,o,v) -> (o,u,l,v,rt)
    } else {
      g.to_env = {2, 3, 4, 0, 1};    // (l, dn, rt | d, up)
      g.from_env = {3, 4, 0, 1, 2};  // (l,dn,rt,o,v) -> (o,v,l,dn,rt)
    }
  }
  return g;
}

struct ReducedSite {
  Tensor q;  // (env_flat, t); empty when the QR step is skipped
  Tensor r;  // (t, phys, shared)
  Shape env_shape;
  bool reduced = false;
};

ReducedSite reduce_site(const Tensor& site, const PairGeometry& g, UpdateStrategy strategy) {
  Tensor p = site.permute(std::span<const std::size_t>(g.to_env));
  ReducedSite out;
  out.env_shape = {p.extent(0), p.extent(1), p.extent(2)};
  const std::size_t env = p.extent(0) * p.extent(1) * p.extent(2);
  const std::size_t small = p.extent(3) * p.extent(4);
  if (strategy == UpdateStrategy::direct || env < small) {
    out.r = p.reshape({env, p.extent(3), p.extent(4)});
    out.reduced = false;
    return out;
  }
  if (strategy == UpdateStrategy::qr_svd_gram) {
    auto [q, r] = gram_orthogonalize(p.reshape({env, p.extent(3), p.extent(4)}), 1);
    out.q = q.reshape({env, small});
    out.r = r.reshape({small, p.extent(3), p.extent(4)});
  } else {
    QrResult qr_res = qr(p.reshape({env, p.extent(3), p.extent(4)}), 1);
    out.q = qr_res.q;
    out.r = qr_res.r;
  }
  out.reduced = true;
  return out;
}

Tensor restore_site(const ReducedSite& rs, const Tensor& updated, const PairGeometry& g) {
  // updated: (t, out-phys, new-bond) -> (env..., o, v) -> site axis order.
  Tensor full = rs.reduced ? contract("et,tov->eov", rs.q, updated) : updated;
  Shape unfolded = rs.env_shape;
  unfolded.push_back(full.extent(1));
  unfolded.push_back(full.extent(2));
  return full.reshape(unfolded).permute(std::span<const std::size_t>(g.from_env));
}

}  // namespace

PepsState apply_two_site(const PepsState& s, const Tensor& gate, Coord a, Coord b,
                         const UpdateOption& opt) {
  s.check_coord(a);
  s.check_coord(b);
  const std::size_t d = s.phys_dim();
  if (gate.order() != 4) throw ShapeError("two-site gate must be (out,out,in,in)");
  for (std::size_t ax = 0; ax < 4; ++ax) {
    if (gate.extent(ax) != d) throw ShapeError("two-site gate extents must equal d");
  }

  Tensor g = gate;
  // Normalize so that a precedes b (left-right or top-bottom).
  if (b.row < a.row || (b.row == a.row && b.col < a.col)) {
    std::swap(a, b);
    g = g.permute({1, 0, 3, 2});
  }
  bool horizontal = a.row == b.row && b.col == a.col + 1;
  bool vertical = a.col == b.col && b.row == a.row + 1;
  if (!horizontal && !vertical) {
    throw ValidationError("sites are not lattice-adjacent; use apply_distant for routed pairs");
  }

  PairGeometry ga = geometry(true, horizontal);
  PairGeometry gb = geometry(false, horizontal);
  ReducedSite ra = reduce_site(s.site(a.row, a.col), ga, opt.strategy);
  ReducedSite rb = reduce_site(s.site(b.row, b.col), gb, opt.strategy);

  const std::size_t pre_bond = ra.r.extent(2);
  TruncationPolicy policy = opt.policy;
  if (policy.max_rank == 0) policy.max_rank = d * pre_bond;

  // Network {G, Ra, Rb} split as (t_a, out_a | out_b, t_b).
  ImplicitOperator net({g, ra.r, rb.r}, {"opij", "ais", "bjs"}, "ao", "pb");
  EinsumsvdResult split = einsumsvd(net, policy, SvdStrategy::exact);

  // split.t1: (t_a, o, v); split.t2: (v, p, t_b) -> (t_b, p, v).
  Tensor new_a = restore_site(ra, split.t1, ga);
  Tensor new_b = restore_site(rb, split.t2.permute({2, 1, 0}), gb);

  std::vector<Tensor> sites = s.sites();
  sites[a.row * s.cols() + a.col] = std::move(new_a);
  sites[b.row * s.cols() + b.col] = std::move(new_b);
  return PepsState(s.rows(), s.cols(), d, std::move(sites));
}

PepsState apply_distant(const PepsState& s, const Tensor& gate, Coord a, Coord b,
                        const UpdateOption& opt) {
  s.check_coord(a);
  s.check_coord(b);
  if (a == b) throw ValidationError("distant gate needs two distinct sites");

  // Route a along its row to b's column, then along the column to b.
  std::vector<Coord> path;
  path.push_back(a);
  Coord cur = a;
  while (cur.col != b.col) {
    cur.col += (b.col > cur.col) ? 1 : static_cast<std::size_t>(-1);
    path.push_back(cur);
  }
  while (cur.row != b.row) {
    cur.row += (b.row > cur.row) ? 1 : static_cast<std::size_t>(-1);
    path.push_back(cur);
  }
  // path.back() == b; the moving qubit stops one short of b.
  PepsState state = s;
  Tensor swap = gates::SWAP();
  for (std::size_t i = 0; i + 2 < path.size(); ++i) {
    state = apply_two_site(state, swap, path[i], path[i + 1], opt);
  }
  Coord moved = path.size() >= 2 ? path[path.size() - 2] : a;
  state = apply_two_site(state, gate, moved, b, opt);
  for (std::size_t i = path.size() - 2; i-- > 0;) {
    state = apply_two_site(state, swap, path[i], path[i + 1], opt);
  }
  return state;
}

namespace {

void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

constexpr char kMagic[8] = {'P', 'E', 'P', 'S', '2', 'D', '0', '1'};
constexpr char kAxisTag[] = "pudlr";  // physical, up, left, down, right

}  // namespace

void save_peps(const PepsState& s, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open '" + path + "' for writing");
  f.write(kMagic, sizeof(kMagic));
  write_u64(f, s.rows());
  write_u64(f, s.cols());
  write_u64(f, s.phys_dim());
  write_u64(f, sizeof(kAxisTag) - 1);
  f.write(kAxisTag, sizeof(kAxisTag) - 1);
  for (const auto& t : s.sites()) {
    write_u64(f, t.order());
    for (std::size_t a = 0; a < t.order(); ++a) write_u64(f, t.extent(a));
    f.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(cplx)));
  }
  if (!f) throw ValidationError("write failed for '" + path + "'");
}

PepsState load_peps(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open '" + path + "' for reading");
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("'" + path + "' is not a PEPS container");
  }
  std::uint64_t rows = read_u64(f), cols = read_u64(f), d = read_u64(f);
  std::uint64_t tag_len = read_u64(f);
  std::string tag(tag_len, '\0');
  f.read(tag.data(), static_cast<std::streamsize>(tag_len));
  if (tag != kAxisTag) throw ValidationError("unknown axis convention tag '" + tag + "'");
  std::vector<Tensor> sites;
  sites.reserve(rows * cols);
  for (std::uint64_t i = 0; i < rows * cols; ++i) {
    std::uint64_t order = read_u64(f);
    Shape shape(order);
    for (auto& e : shape) e = read_u64(f);
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data().data()),
           static_cast<std::streamsize>(t.size() * sizeof(cplx)));
    sites.push_back(std::move(t));
  }
  if (!f) throw ValidationError("truncated PEPS container '" + path + "'");
  return PepsState(rows, cols, d, std::move(sites));
}

namespace gates {

Tensor I2() { return Tensor::eye(2); }

Tensor X() { return Tensor::from_values({2, 2}, {0, 1, 1, 0}); }

Tensor Y() { return Tensor::from_values({2, 2}, {0, cplx(0, -1), cplx(0, 1), 0}); }

Tensor Z() { return Tensor::from_values({2, 2}, {1, 0, 0, -1}); }

Tensor H() {
  const double s = 1.0 / std::sqrt(2.0);
  return Tensor::from_values({2, 2}, {s, s, s, -s});
}

Tensor Ry(double theta) {
  double c = std::cos(theta / 2), s = std::sin(theta / 2);
  return Tensor::from_values({2, 2}, {c, -s, s, c});
}

namespace {
// sqrt of an involution P: e^{-i pi/4} (I + i P) / sqrt(2).
Tensor sqrt_involution(const Tensor& p) {
  cplx w = std::exp(cplx(0, -M_PI / 4)) / std::sqrt(2.0);
  Tensor out({2, 2});
  Tensor eye = Tensor::eye(2);
  for (std::size_t i = 0; i < 4; ++i) {
    out.data()[i] = w * (eye.data()[i] + cplx(0, 1) * p.data()[i]);
  }
  return out;
}
}  // namespace

Tensor sqrtX() { return sqrt_involution(X()); }
Tensor sqrtY() { return sqrt_involution(Y()); }

Tensor sqrtW() {
  const double s = 1.0 / std::sqrt(2.0);
  Tensor w({2, 2});
  Tensor x = X(), y = Y();
  for (std::size_t i = 0; i < 4; ++i) w.data()[i] = s * (x.data()[i] + y.data()[i]);
  return sqrt_involution(w);
}

Tensor CNOT() {
  Tensor g({2, 2, 2, 2});
  // control = first site: |c t> -> |c, t xor c>
  g.at({0, 0, 0, 0}) = 1;
  g.at({0, 1, 0, 1}) = 1;
  g.at({1, 1, 1, 0}) = 1;
  g.at({1, 0, 1, 1}) = 1;
  return g;
}

Tensor SWAP() {
  Tensor g({2, 2, 2, 2});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) g.at({j, i, i, j}) = 1;
  }
  return g;
}

Tensor ISWAP() {
  Tensor g({2, 2, 2, 2});
  g.at({0, 0, 0, 0}) = 1;
  g.at({1, 1, 1, 1}) = 1;
  g.at({1, 0, 0, 1}) = cplx(0, 1);
  g.at({0, 1, 1, 0}) = cplx(0, 1);
  return g;
}

Tensor CZ() {
  Tensor g({2, 2, 2, 2});
  g.at({0, 0, 0, 0}) = 1;
  g.at({0, 1, 0, 1}) = 1;
  g.at({1, 0, 1, 0}) = 1;
  g.at({1, 1, 1, 1}) = -1;
  return g;
}

Tensor two_site(const Tensor& a, const Tensor& b) { return contract("oi,pj->opij", a, b); }

}  // namespace gates

}  // namespace peps
