#include "peps/contraction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "json.hpp"
#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/rng.hpp"

namespace peps {

std::string family_name(ContractFamily f) {
  switch (f) {
    case ContractFamily::exact: return "exact";
    case ContractFamily::bmps: return "bmps";
    case ContractFamily::ibmps: return "ibmps";
    case ContractFamily::two_layer_ibmps: return "two-layer-ibmps";
  }
  return "?";
}

ContractOption ContractOption::exact_network(std::size_t budget) {
  ContractOption o;
  o.family = ContractFamily::exact;
  o.memory_budget = budget;
  return o;
}

ContractOption ContractOption::bmps_opt(std::size_t m, std::uint64_t seed) {
  ContractOption o;
  o.family = ContractFamily::bmps;
  o.trunc.max_rank = m;
  o.strategy = SvdStrategy::exact;
  o.seed = seed;
  return o;
}

ContractOption ContractOption::ibmps_opt(std::size_t m, std::uint64_t seed, int power_iters) {
  ContractOption o;
  o.family = ContractFamily::ibmps;
  o.trunc.max_rank = m;
  o.strategy = SvdStrategy::implicit_rsvd;
  o.rsvd.power_iters = power_iters;
  o.seed = seed;
  return o;
}

ContractOption ContractOption::two_layer_opt(std::size_t m, std::uint64_t seed, int power_iters) {
  ContractOption o;
  o.family = ContractFamily::two_layer_ibmps;
  o.trunc.max_rank = m;
  o.strategy = SvdStrategy::implicit_rsvd;
  o.rsvd.power_iters = power_iters;
  o.seed = seed;
  return o;
}

std::string ContractionReport::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family;
  j["m"] = m;
  j["flops"] = flops;
  j["peak_intermediate_elements"] = peak_intermediate_elements;
  j["seed"] = seed;
  j["value_re"] = value_re;
  j["value_im"] = value_im;
  j["seconds"] = seconds;
  return j.dump();
}

OneLayerGrid::OneLayerGrid(std::size_t rows, std::size_t cols, std::vector<Tensor> sites)
    : rows_(rows), cols_(cols), sites_(std::move(sites)) {
  if (sites_.size() != rows_ * cols_) throw ShapeError("one-layer site count mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const Tensor& t = site(r, c);
      if (t.order() != 4) {
        throw ShapeError("one-layer sites must be order 4 (up, left, down, right); "
                         "physical indices must be projected or merged first");
      }
      if (r == 0 && t.extent(0) != 1) throw ShapeError("top boundary bond must be 1");
      if (c == 0 && t.extent(1) != 1) throw ShapeError("left boundary bond must be 1");
      if (r == rows_ - 1 && t.extent(2) != 1) throw ShapeError("bottom boundary bond must be 1");
      if (c == cols_ - 1 && t.extent(3) != 1) throw ShapeError("right boundary bond must be 1");
      if (r + 1 < rows_ && t.extent(2) != site(r + 1, c).extent(0)) {
        throw ShapeError("vertical bond mismatch in one-layer grid");
      }
      if (c + 1 < cols_ && t.extent(3) != site(r, c + 1).extent(1)) {
        throw ShapeError("horizontal bond mismatch in one-layer grid");
      }
    }
  }
}

OneLayerGrid OneLayerGrid::random(std::size_t rows, std::size_t cols, std::size_t bond,
                                  std::uint64_t seed) {
  std::vector<Tensor> sites;
  sites.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      Shape sh{r == 0 ? 1 : bond, c == 0 ? 1 : bond, r == rows - 1 ? 1 : bond,
               c == cols - 1 ? 1 : bond};
      sites.push_back(random_tensor(sh, derive_seed(seed, r, c)));
    }
  }
  return OneLayerGrid(rows, cols, std::move(sites));
}

std::size_t OneLayerGrid::max_bond() const {
  std::size_t m = 1;
  for (const auto& t : sites_) {
    for (std::size_t a = 0; a < 4; ++a) m = std::max(m, t.extent(a));
  }
  return m;
}

OneLayerGrid OneLayerGrid::transposed() const {
  std::vector<Tensor> sites(rows_ * cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      // (up, left, down, right) -> (left, up, right, down)
      sites[c * rows_ + r] = site(r, c).permute({1, 0, 3, 2});
    }
  }
  return OneLayerGrid(cols_, rows_, std::move(sites));
}

namespace {

Mps row_as_mps(const OneLayerGrid& g, std::size_t r) {
  Mps out;
  out.sites.reserve(g.cols());
  for (std::size_t c = 0; c < g.cols(); ++c) {
    const Tensor& t = g.site(r, c);
    // (u, l, d, r) -> (u*d [phys], l, r); one of u, d has extent 1.
    out.sites.push_back(
        t.permute({0, 2, 1, 3}).reshape({t.extent(0) * t.extent(2), t.extent(1), t.extent(3)}));
  }
  return out;
}

Mpo row_as_mpo(const OneLayerGrid& g, std::size_t r, bool from_below) {
  Mpo out;
  out.sites.reserve(g.cols());
  for (std::size_t c = 0; c < g.cols(); ++c) {
    const Tensor& t = g.site(r, c);
    // Site axes are (up, left, down, right); the MPO wants (up, down, left,
    // right), with up/down exchanged when absorbing from below.
    out.sites.push_back(from_below ? t.permute({2, 0, 1, 3}) : t.permute({0, 2, 1, 3}));
  }
  return out;
}

void check_budget(std::size_t elements, std::size_t budget, const char* what) {
  if (elements > budget) {
    throw ResourceError(std::string(what) + " needs " + std::to_string(elements) +
                            " elements, budget is " + std::to_string(budget),
                        elements);
  }
}

void check_apply_budget(const Mps& s, const Mpo& o, std::size_t budget, const char* what) {
  for (std::size_t c = 0; c < s.length(); ++c) {
    std::size_t el = o.sites[c].extent(1) * s.sites[c].extent(1) * o.sites[c].extent(2) *
                     s.sites[c].extent(2) * o.sites[c].extent(3);
    check_budget(el, budget, what);
  }
}

}  // namespace

cplx contract_exact(const OneLayerGrid& g, std::size_t memory_budget) {
  const std::size_t n = g.rows();
  if (n == 1) {
    return chain_scalar(row_as_mps(g, 0));
  }
  const std::size_t half = n / 2;
  Mps top = row_as_mps(g, 0);
  for (std::size_t r = 1; r < half; ++r) {
    Mpo o = row_as_mpo(g, r, false);
    check_apply_budget(top, o, memory_budget, "contract_exact");
    top = exact_apply_mpo(top, o);
  }
  Mps bottom = row_as_mps(g, n - 1);
  for (std::size_t r = n - 1; r-- > half;) {
    Mpo o = row_as_mpo(g, r, true);
    check_apply_budget(bottom, o, memory_budget, "contract_exact");
    bottom = exact_apply_mpo(bottom, o);
  }
  for (std::size_t c = 0; c < g.cols(); ++c) {
    check_budget(top.phys(c) * top.right_bond(c) * bottom.right_bond(c), memory_budget,
                 "contract_exact");
  }
  return mps_glue(top, bottom);
}

namespace {

cplx contract_boundary(const OneLayerGrid& g, const ContractOption& opt) {
  Mps s = row_as_mps(g, 0);
  for (std::size_t r = 1; r < g.rows(); ++r) {
    ApplyOption ao;
    ao.policy = opt.trunc;
    if (ao.policy.max_rank == 0) ao.policy.max_rank = SIZE_MAX;
    ao.strategy = opt.strategy;
    ao.rsvd = opt.rsvd;
    ao.absorb = opt.canonicalize ? (r % 2 ? Absorb::right : Absorb::left) : Absorb::split;
    ao.seed_base = derive_seed(opt.seed, 0x10, r);
    s = approx_apply_mpo(s, row_as_mpo(g, r, false), ao);
  }
  return chain_scalar(s);
}

}  // namespace

cplx contract_one_layer(const OneLayerGrid& g, const ContractOption& opt,
                        ContractionReport* report) {
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t flops0 = instr::flops();
  std::uint64_t peak0 = instr::peak_elements();

  cplx v;
  switch (opt.family) {
    case ContractFamily::exact:
      v = contract_exact(g, opt.memory_budget);
      break;
    case ContractFamily::bmps:
    case ContractFamily::ibmps:
      v = contract_boundary(g, opt);
      break;
    case ContractFamily::two_layer_ibmps:
      throw ValidationError("two-layer family needs a bra and a ket state");
  }

  if (report) {
    report->family = family_name(opt.family);
    report->m = opt.trunc.max_rank;
    report->flops = instr::flops() - flops0;
    report->peak_intermediate_elements = std::max(instr::peak_elements(), peak0);
    report->seed = opt.seed;
    report->value_re = v.real();
    report->value_im = v.imag();
    report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return v;
}

TwoLayerBoundary two_layer_first_row(const PepsState& bra, const PepsState& ket) {
  TwoLayerBoundary out;
  out.mps.sites.reserve(bra.cols());
  for (std::size_t c = 0; c < bra.cols(); ++c) {
    const Tensor& b = bra.site(0, c);
    const Tensor& k = ket.site(0, c);
    Tensor t = contract("dulbr,dULBR->bBlLrR", b.conj(), k);
    Tensor site = t.reshape({b.extent(3) * k.extent(3), b.extent(2) * k.extent(2),
                             b.extent(4) * k.extent(4)});
    out.mps.sites.push_back(std::move(site));
    out.phys.emplace_back(b.extent(3), k.extent(3));
  }
  return out;
}

TwoLayerBoundary two_layer_apply_row(const TwoLayerBoundary& top, const PepsState& bra,
                                     const PepsState& ket, std::size_t row,
                                     const ContractOption& opt, std::uint64_t seed_tag) {
  const std::size_t n = bra.cols();
  TwoLayerBoundary out;
  out.mps.sites.resize(n);
  out.phys.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    out.phys.emplace_back(bra.site(row, c).extent(3), ket.site(row, c).extent(3));
  }

  Absorb absorb = opt.canonicalize ? (row % 2 ? Absorb::right : Absorb::left) : Absorb::split;

  // Pending tensor v: (a, bra-down, ket-down, mps bond, bra-right, ket-right).
  const Tensor& s0 = top.mps.sites[0];
  Tensor s0s = s0.reshape({top.phys[0].first, top.phys[0].second, s0.extent(1), s0.extent(2)});
  Tensor v = detail::contract_network(
      {s0s, bra.site(row, 0).conj(), ket.site(row, 0)},
      {"uvls", "dumbe", "dvncf"}, "bcsef");
  v = v.reshape({1, v.extent(0), v.extent(1), v.extent(2), v.extent(3), v.extent(4)});

  for (std::size_t c = 1; c < n; ++c) {
    const Tensor& sc = top.mps.sites[c];
    Tensor scs = sc.reshape({top.phys[c].first, top.phys[c].second, sc.extent(1), sc.extent(2)});
    ImplicitOperator net({v, scs, bra.site(row, c).conj(), ket.site(row, c)},
                         {"apqsmn", "uvst", "dumbe", "dvncf"}, "apq", "bctef");
    TruncationPolicy policy = opt.trunc;
    if (policy.max_rank == 0) policy.max_rank = SIZE_MAX;
    RsvdConfig cfg = opt.rsvd;
    cfg.seed = derive_seed(opt.seed, seed_tag, row, c);
    EinsumsvdResult split = einsumsvd(net, policy, opt.strategy, absorb, cfg);
    // t1 (a, pb, pk, rho) -> mps site (pb*pk, a, rho)
    Tensor site = split.t1.permute({1, 2, 0, 3});
    out.mps.sites[c - 1] = site.reshape(
        {site.extent(0) * site.extent(1), site.extent(2), site.extent(3)});
    v = split.t2;  // (rho, b, c, t, e, f)
  }
  Tensor last = v.permute({1, 2, 0, 3, 4, 5});
  out.mps.sites[n - 1] = last.reshape({last.extent(0) * last.extent(1), last.extent(2),
                                       last.extent(3) * last.extent(4) * last.extent(5)});
  out.mps.validate();
  return out;
}

cplx contract_two_layer(const PepsState& bra, const PepsState& ket, const ContractOption& opt,
                        ContractionReport* report) {
  if (bra.rows() != ket.rows() || bra.cols() != ket.cols() || bra.phys_dim() != ket.phys_dim()) {
    throw ValidationError("two-layer contraction needs matching grids");
  }
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t flops0 = instr::flops();

  TwoLayerBoundary s = two_layer_first_row(bra, ket);
  for (std::size_t r = 1; r < bra.rows(); ++r) {
    s = two_layer_apply_row(s, bra, ket, r, opt, 0x20);
  }
  cplx v = chain_scalar(s.mps);

  if (report) {
    report->family = family_name(opt.family);
    report->m = opt.trunc.max_rank;
    report->flops = instr::flops() - flops0;
    report->peak_intermediate_elements = instr::peak_elements();
    report->seed = opt.seed;
    report->value_re = v.real();
    report->value_im = v.imag();
    report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Band zipper

namespace {

struct BandLayout {
  bool has_top = false, has_bottom = false;
  std::size_t r0 = 0, r1 = 0;
  std::size_t n_rows() const { return r1 - r0 + 1; }
  // Standard carried roles: [top] [bra,ket per band row] [bottom].
  std::size_t role_count() const { return (has_top ? 1 : 0) + 2 * n_rows() + (has_bottom ? 1 : 0); }
  std::size_t top_role() const { return 0; }
  std::size_t bra_role(std::size_t band_row) const { return (has_top ? 1 : 0) + 2 * band_row; }
  std::size_t ket_role(std::size_t band_row) const { return (has_top ? 1 : 0) + 2 * band_row + 1; }
  std::size_t bottom_role() const { return role_count() - 1; }
};

constexpr const char* kInChars = "ABCDEFGHIJ";
constexpr const char* kOutChars = "MNOPQRSTUV";

struct ColumnNet {
  std::vector<Tensor> tensors;
  std::vector<std::string> labels;
  std::string out_labels;
};

/// Assembles the column-c transfer network of a band.  Gate-bond labels:
/// bonds whose partner column is to the left use in-chars, to the right use
/// out-chars (appended after the standard roles), same column internal.
ColumnNet band_column(const BandLayout& lay, const TwoLayerBoundary* top, const PepsState& bra,
                      const PepsState& ket, const TwoLayerBoundary* bottom,
                      std::span<const InsertionPiece> pieces, std::size_t c,
                      std::span<const int> in_gate_bonds, std::span<const int> out_gate_bonds) {
  ColumnNet net;
  char dummy = '0';
  auto fresh_dummy = [&]() { return dummy++; };

  auto in_char = [&](std::size_t role) { return kInChars[role]; };
  auto out_char = [&](std::size_t role) { return kOutChars[role]; };
  auto gate_in_char = [&](int bond_id) {
    for (std::size_t i = 0; i < in_gate_bonds.size(); ++i) {
      if (in_gate_bonds[i] == bond_id) return kInChars[lay.role_count() + i];
    }
    throw ShapeError("gate bond not carried into this column");
  };
  auto gate_out_char = [&](int bond_id) {
    for (std::size_t i = 0; i < out_gate_bonds.size(); ++i) {
      if (out_gate_bonds[i] == bond_id) return kOutChars[lay.role_count() + i];
    }
    throw ShapeError("gate bond not carried out of this column");
  };

  const std::size_t n_cols = bra.cols();
  auto h_in = [&](std::size_t role) { return c == 0 ? fresh_dummy() : in_char(role); };
  auto h_out = [&](std::size_t role) { return c + 1 == n_cols ? fresh_dummy() : out_char(role); };

  if (lay.has_top) {
    const Tensor& t = top->mps.sites[c];
    net.tensors.push_back(
        t.reshape({top->phys[c].first, top->phys[c].second, t.extent(1), t.extent(2)}));
    net.labels.push_back(std::string(1, 'u') + 'v' + h_in(lay.top_role()) + h_out(lay.top_role()));
  }

  // Physical labels per band row; insertion pieces split bra/ket physicals.
  for (std::size_t br = 0; br < lay.n_rows(); ++br) {
    std::size_t row = lay.r0 + br;
    char up_b = br == 0 ? (lay.has_top ? 'u' : fresh_dummy()) : 'y';
    char up_k = br == 0 ? (lay.has_top ? 'v' : fresh_dummy()) : 'z';
    bool last_row = br + 1 == lay.n_rows();
    char dn_b = last_row ? (lay.has_bottom ? 'k' : fresh_dummy()) : 'y';
    char dn_k = last_row ? (lay.has_bottom ? 'l' : fresh_dummy()) : 'z';

    const InsertionPiece* piece = nullptr;
    for (const auto& p : pieces) {
      if (p.site.row == row && p.site.col == c) {
        if (piece) throw ValidationError("at most one insertion piece per site");
        piece = &p;
      }
    }
    char phys_b = br == 0 ? 'w' : 'i';
    char phys_k = piece ? (br == 0 ? 'x' : 'j') : phys_b;

    net.tensors.push_back(bra.site(row, c).conj());
    net.labels.push_back(std::string(1, phys_b) + up_b + h_in(lay.bra_role(br)) + dn_b +
                         h_out(lay.bra_role(br)));
    net.tensors.push_back(ket.site(row, c));
    net.labels.push_back(std::string(1, phys_k) + up_k + h_in(lay.ket_role(br)) + dn_k +
                         h_out(lay.ket_role(br)));

    if (piece) {
      std::string pl = std::string(1, phys_b) + phys_k;
      for (std::size_t bi = 0; bi < piece->bond_ids.size(); ++bi) {
        int id = piece->bond_ids[bi];
        // Locate the partner column for this bond id.
        std::size_t partner_col = c;
        bool found = false;
        for (const auto& p : pieces) {
          if (&p != piece) {
            for (int other : p.bond_ids) {
              if (other == id) {
                partner_col = p.site.col;
                found = true;
              }
            }
          }
        }
        if (!found) throw ValidationError("gate bond has no partner piece");
        if (partner_col == c) {
          pl += 'g';
        } else if (partner_col > c) {
          pl += gate_out_char(id);
        } else {
          pl += gate_in_char(id);
        }
      }
      net.tensors.push_back(piece->op);
      net.labels.push_back(pl);
    }
  }

  if (lay.has_bottom) {
    const Tensor& t = bottom->mps.sites[c];
    net.tensors.push_back(
        t.reshape({bottom->phys[c].first, bottom->phys[c].second, t.extent(1), t.extent(2)}));
    net.labels.push_back(std::string(1, 'k') + 'l' + h_in(lay.bottom_role()) +
                         h_out(lay.bottom_role()));
  }

  for (std::size_t role = 0; role < lay.role_count(); ++role) {
    if (c + 1 < n_cols) net.out_labels += out_char(role);
  }
  for (std::size_t i = 0; i < out_gate_bonds.size(); ++i) {
    net.out_labels += kOutChars[lay.role_count() + i];
  }
  return net;
}

BandLayout make_layout(const TwoLayerBoundary* top, std::size_t r0, std::size_t r1,
                       const TwoLayerBoundary* bottom) {
  if (r1 < r0 || r1 - r0 > 1) throw ValidationError("band must span one or two rows");
  BandLayout lay;
  lay.has_top = top != nullptr;
  lay.has_bottom = bottom != nullptr;
  lay.r0 = r0;
  lay.r1 = r1;
  return lay;
}

Tensor initial_left(const BandLayout& lay) {
  (void)lay;
  return Tensor::scalar(1.0);
}

/// Gate bonds carried across the cut after column c.
std::vector<int> active_gate_bonds(std::span<const InsertionPiece> pieces, std::size_t c) {
  std::vector<int> out;
  for (const auto& p : pieces) {
    for (int id : p.bond_ids) {
      std::size_t lo = p.site.col, hi = p.site.col;
      for (const auto& q : pieces) {
        if (&q != &p) {
          for (int other : q.bond_ids) {
            if (other == id) {
              lo = std::min(lo, q.site.col);
              hi = std::max(hi, q.site.col);
            }
          }
        }
      }
      if (lo <= c && c < hi) {
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor band_step(const BandLayout& lay, Tensor l, const std::string& l_labels,
                 const TwoLayerBoundary* top, const PepsState& bra, const PepsState& ket,
                 const TwoLayerBoundary* bottom, std::span<const InsertionPiece> pieces,
                 std::size_t c, std::span<const int> in_bonds, std::span<const int> out_bonds) {
  ColumnNet net = band_column(lay, top, bra, ket, bottom, pieces, c, in_bonds, out_bonds);
  std::vector<Tensor> tensors;
  std::vector<std::string> labels;
  tensors.push_back(std::move(l));
  labels.push_back(l_labels);
  for (std::size_t i = 0; i < net.tensors.size(); ++i) {
    tensors.push_back(std::move(net.tensors[i]));
    labels.push_back(net.labels[i]);
  }
  return detail::contract_network(std::move(tensors), std::move(labels), net.out_labels);
}

std::string cut_labels(const BandLayout& lay, std::size_t n_gate_bonds, const char* chars) {
  std::string s;
  for (std::size_t i = 0; i < lay.role_count() + n_gate_bonds; ++i) s += chars[i];
  return s;
}

/// Relabels out-chars to in-chars between steps (the tensor is already in
/// role order, so this is the identity on data).
std::string to_in_labels(const std::string& out_labels) {
  std::string s;
  for (char c : out_labels) {
    const char* pos = std::strchr(kOutChars, c);
    s += kInChars[pos - kOutChars];
  }
  return s;
}

}  // namespace

cplx band_value(const TwoLayerBoundary* top, const PepsState& bra, const PepsState& ket,
                std::size_t r0, std::size_t r1, const TwoLayerBoundary* bottom,
                std::span<const InsertionPiece> pieces) {
  BandLayout lay = make_layout(top, r0, r1, bottom);
  Tensor l = initial_left(lay);
  std::string l_labels;
  std::vector<int> in_bonds;
  for (std::size_t c = 0; c < bra.cols(); ++c) {
    std::vector<int> out_bonds = active_gate_bonds(pieces, c);
    l = band_step(lay, std::move(l), l_labels, top, bra, ket, bottom, pieces, c, in_bonds,
                  out_bonds);
    l_labels = c + 1 < bra.cols()
                   ? to_in_labels(cut_labels(lay, out_bonds.size(), kOutChars))
                   : std::string();
    in_bonds = std::move(out_bonds);
  }
  return l.scalar_value();
}

BandEnvironment band_environment(const TwoLayerBoundary* top, const PepsState& bra,
                                 const PepsState& ket, std::size_t r0, std::size_t r1,
                                 const TwoLayerBoundary* bottom) {
  BandLayout lay = make_layout(top, r0, r1, bottom);
  BandEnvironment env;
  env.r0 = r0;
  env.r1 = r1;
  const std::size_t n = bra.cols();
  env.left.resize(n);
  env.right.resize(n);

  Tensor l = initial_left(lay);
  std::string l_labels;
  for (std::size_t c = 0; c < n; ++c) {
    l = band_step(lay, std::move(l), l_labels, top, bra, ket, bottom, {}, c, {}, {});
    env.left[c] = l;
    l_labels = c + 1 < n ? to_in_labels(cut_labels(lay, 0, kOutChars)) : std::string();
  }

  // Right pass: same machinery on the horizontally mirrored band.
  auto mirror_boundary = [&](const TwoLayerBoundary* b) -> TwoLayerBoundary {
    TwoLayerBoundary m;
    if (!b) return m;
    for (std::size_t c = b->mps.sites.size(); c-- > 0;) {
      m.mps.sites.push_back(b->mps.sites[c].permute({0, 2, 1}));
      m.phys.push_back(b->phys[c]);
    }
    return m;
  };
  auto mirror_state = [&](const PepsState& s) {
    std::vector<Tensor> sites;
    sites.reserve(s.rows() * s.cols());
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = s.cols(); c-- > 0;) {
        sites.push_back(s.site(r, c).permute({0, 1, 4, 3, 2}));  // swap left/right
      }
    }
    return PepsState(s.rows(), s.cols(), s.phys_dim(), std::move(sites));
  };
  TwoLayerBoundary mtop = mirror_boundary(top);
  TwoLayerBoundary mbot = mirror_boundary(bottom);
  PepsState mbra = mirror_state(bra);
  PepsState mket = mirror_state(ket);
  Tensor r = initial_left(lay);
  std::string r_labels;
  for (std::size_t c = 0; c < n; ++c) {
    r = band_step(lay, std::move(r), r_labels, top ? &mtop : nullptr, mbra, mket,
                  bottom ? &mbot : nullptr, {}, c, {}, {});
    env.right[n - 1 - c] = r;
    r_labels = c + 1 < n ? to_in_labels(cut_labels(lay, 0, kOutChars)) : std::string();
  }
  return env;
}

cplx band_splice(const BandEnvironment& env, const TwoLayerBoundary* top, const PepsState& bra,
                 const PepsState& ket, const TwoLayerBoundary* bottom,
                 std::span<const InsertionPiece> pieces, std::size_t c0, std::size_t c1) {
  BandLayout lay = make_layout(top, env.r0, env.r1, bottom);
  const std::size_t n = bra.cols();
  if (c1 >= n || c0 > c1) throw ValidationError("bad splice column range");

  Tensor l = c0 == 0 ? initial_left(lay) : env.left[c0 - 1];
  std::string l_labels = c0 == 0 ? std::string() : to_in_labels(cut_labels(lay, 0, kOutChars));
  std::vector<int> in_bonds;
  for (std::size_t c = c0; c <= c1; ++c) {
    std::vector<int> out_bonds = active_gate_bonds(pieces, c);
    l = band_step(lay, std::move(l), l_labels, top, bra, ket, bottom, pieces, c, in_bonds,
                  out_bonds);
    l_labels = c + 1 < n ? to_in_labels(cut_labels(lay, out_bonds.size(), kOutChars))
                         : std::string();
    in_bonds = std::move(out_bonds);
  }
  if (c1 + 1 == n) return l.scalar_value();

  // Glue with the right environment over the carried roles.
  const Tensor& r = env.right[c1 + 1];
  std::string labels = cut_labels(lay, 0, kInChars);
  return detail::contract_network({l, r}, {labels, labels}, "").scalar_value();
}

// ---------------------------------------------------------------------------

OneLayerGrid project_to_one_layer(const PepsState& s, std::span<const int> bits) {
  if (bits.size() != s.qubits()) throw ValidationError("bit string length must equal site count");
  std::vector<Tensor> sites;
  sites.reserve(s.qubits());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < s.cols(); ++c) {
      int b = bits[r * s.cols() + c];
      if (b < 0 || static_cast<std::size_t>(b) >= s.phys_dim()) {
        throw ValidationError("bit value out of range");
      }
      Tensor e({s.phys_dim()});
      e.data()[static_cast<std::size_t>(b)] = 1.0;
      sites.push_back(contract("p,puldr->uldr", e.conj(), s.site(r, c)));
    }
  }
  return OneLayerGrid(s.rows(), s.cols(), std::move(sites));
}

OneLayerGrid merge_two_layer(const PepsState& bra, const PepsState& ket) {
  if (bra.rows() != ket.rows() || bra.cols() != ket.cols() || bra.phys_dim() != ket.phys_dim()) {
    throw ValidationError("merge needs matching grids");
  }
  std::vector<Tensor> sites;
  sites.reserve(bra.qubits());
  for (std::size_t r = 0; r < bra.rows(); ++r) {
    for (std::size_t c = 0; c < bra.cols(); ++c) {
      const Tensor& b = bra.site(r, c);
      const Tensor& k = ket.site(r, c);
      Tensor m = contract("dulbr,dULBR->uUlLbBrR", b.conj(), k);
      sites.push_back(m.reshape({b.extent(1) * k.extent(1), b.extent(2) * k.extent(2),
                                 b.extent(3) * k.extent(3), b.extent(4) * k.extent(4)}));
    }
  }
  return OneLayerGrid(bra.rows(), bra.cols(), std::move(sites));
}

cplx amplitude(const PepsState& s, std::span<const int> bits, const ContractOption& opt,
               ContractionReport* report) {
  OneLayerGrid g = project_to_one_layer(s, bits);
  return contract_one_layer(g, opt, report);
}

cplx inner_product(const PepsState& bra, const PepsState& ket, const ContractOption& opt) {
  if (bra.rows() != ket.rows() || bra.cols() != ket.cols() || bra.phys_dim() != ket.phys_dim()) {
    throw ValidationError("inner product needs matching grids");
  }
  if (opt.family == ContractFamily::two_layer_ibmps) {
    return contract_two_layer(bra, ket, opt);
  }
  OneLayerGrid merged = merge_two_layer(bra, ket);
  return contract_one_layer(merged, opt);
}

double norm(const PepsState& s, const ContractOption& opt) {
  cplx v = inner_product(s, s, opt);
  return std::sqrt(std::max(0.0, v.real()));
}

}  // namespace peps
