#include "peps/observables.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/linalg.hpp"
#include "peps/rng.hpp"

namespace peps {

namespace {
constexpr std::uint64_t kTagTop = 0x20;
constexpr std::uint64_t kTagBottom = 0x21;
}  // namespace

Observable& Observable::add(cplx coeff, Coord a, const Tensor& op1) {
  if (op1.order() != 2 || op1.extent(0) != op1.extent(1)) {
    throw ShapeError("one-site term operator must be d x d");
  }
  terms_.push_back(LocalTerm{coeff, {a}, op1});
  return *this;
}

Observable& Observable::add(cplx coeff, Coord a, Coord b, const Tensor& op2) {
  if (op2.order() != 4) throw ShapeError("two-site term operator must be (out,out,in,in)");
  if (a == b) throw ValidationError("two-site term needs distinct sites");
  terms_.push_back(LocalTerm{coeff, {a, b}, op2});
  return *this;
}

Observable& Observable::operator+=(const Observable& other) {
  for (const auto& t : other.terms_) terms_.push_back(t);
  return *this;
}

bool Observable::is_hermitian(double tol) const {
  for (const auto& t : terms_) {
    Tensor m = t.op;
    if (t.sites.size() == 2) {
      std::size_t d = m.extent(0);
      m = m.reshape({d * d, d * d});
    }
    const std::size_t n = m.extent(0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        cplx a = t.coeff * m.at({i, j});
        cplx b = std::conj(t.coeff * m.at({j, i}));
        if (std::abs(a - b) > tol) return false;
      }
    }
  }
  return true;
}

Observable build_j1j2(std::size_t rows, std::size_t cols, std::array<double, 3> j1,
                      std::array<double, 3> j2, std::array<double, 3> h) {
  if (rows == 0 || cols == 0) throw ValidationError("grid must be non-empty");
  Observable obs;
  const Tensor paulis[3] = {gates::X(), gates::Y(), gates::Z()};

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      for (int p = 0; p < 3; ++p) {
        if (h[p] != 0.0) obs.add(h[p], {r, c}, paulis[p]);
      }
    }
  }
  auto add_pair = [&](Coord a, Coord b, const std::array<double, 3>& coupling) {
    for (int p = 0; p < 3; ++p) {
      if (coupling[p] != 0.0) obs.add(coupling[p], a, b, gates::two_site(paulis[p], paulis[p]));
    }
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c + 1 < cols; ++c) add_pair({r, c}, {r, c + 1}, j1);
  }
  for (std::size_t r = 0; r + 1 < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) add_pair({r, c}, {r + 1, c}, j1);
  }
  for (std::size_t r = 0; r + 1 < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) add_pair({r, c}, {r + 1, c + 1}, j2);
      if (c > 0) add_pair({r, c}, {r + 1, c - 1}, j2);
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

const std::map<char, Tensor (*)()>& pauli_table() {
  static const std::map<char, Tensor (*)()> table{
      {'X', gates::X}, {'Y', gates::Y}, {'Z', gates::Z}, {'I', gates::I2}};
  return table;
}

std::string format_coeff(cplx c) {
  std::ostringstream os;
  os.precision(17);
  if (c.imag() == 0.0) {
    os << c.real();
  } else {
    os << "(" << c.real() << "," << c.imag() << ")";
  }
  return os.str();
}

cplx parse_coeff(const std::string& tok) {
  if (!tok.empty() && tok.front() == '(') {
    auto comma = tok.find(',');
    auto close = tok.find(')');
    if (comma == std::string::npos || close == std::string::npos) {
      throw ValidationError("bad complex coefficient '" + tok + "'");
    }
    return cplx(std::stod(tok.substr(1, comma - 1)), std::stod(tok.substr(comma + 1, close - comma - 1)));
  }
  return cplx(std::stod(tok), 0.0);
}

Coord parse_site(const std::string& tok, std::size_t& pos) {
  if (pos >= tok.size() || tok[pos] != '(') throw ValidationError("expected '(' in '" + tok + "'");
  auto comma = tok.find(',', pos);
  auto close = tok.find(')', pos);
  if (comma == std::string::npos || close == std::string::npos) {
    throw ValidationError("bad site in '" + tok + "'");
  }
  Coord c{static_cast<std::size_t>(std::stoul(tok.substr(pos + 1, comma - pos - 1))),
          static_cast<std::size_t>(std::stoul(tok.substr(comma + 1, close - comma - 1)))};
  pos = close + 1;
  return c;
}

struct ParsedOp {
  Tensor op;  // (d, d)
  Coord site;
  std::string name;  // single Pauli letter or empty for raw
};

ParsedOp parse_op_token(const std::string& tok) {
  ParsedOp out;
  if (tok.size() >= 2 && pauli_table().count(tok[0]) && tok[1] == '@') {
    out.op = pauli_table().at(tok[0])();
    out.name = tok.substr(0, 1);
    std::size_t pos = 2;
    out.site = parse_site(tok, pos);
    return out;
  }
  if (tok.rfind("M[", 0) == 0) {
    auto close = tok.find(']');
    if (close == std::string::npos) throw ValidationError("unterminated matrix in '" + tok + "'");
    std::string body = tok.substr(2, close - 2);
    std::vector<cplx> vals;
    std::istringstream is(body);
    std::string item;
    while (std::getline(is, item, ',')) {
      auto colon = item.find(':');
      if (colon == std::string::npos) {
        vals.push_back(cplx(std::stod(item), 0.0));
      } else {
        vals.push_back(cplx(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))));
      }
    }
    std::size_t d = static_cast<std::size_t>(std::llround(std::sqrt(double(vals.size()))));
    if (d * d != vals.size()) throw ValidationError("matrix entry count must be a square");
    out.op = Tensor({d, d}, std::move(vals));
    std::size_t pos = close + 1;
    if (pos >= tok.size() || tok[pos] != '@') throw ValidationError("expected '@' in '" + tok + "'");
    ++pos;
    out.site = parse_site(tok, pos);
    return out;
  }
  throw ValidationError("cannot parse operator token '" + tok + "'");
}

std::string format_op(const Tensor& op, Coord site) {
  for (const auto& [name, fn] : pauli_table()) {
    if (op.same_shape(fn()) && op.allclose(fn(), 0.0)) {
      return std::string(1, name) + "@(" + std::to_string(site.row) + "," +
             std::to_string(site.col) + ")";
    }
  }
  std::ostringstream os;
  os.precision(17);
  os << "M[";
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (i) os << ",";
    cplx v = op.data()[i];
    os << v.real();
    if (v.imag() != 0.0) os << ":" << v.imag();
  }
  os << "]@(" << site.row << "," << site.col << ")";
  return os.str();
}

}  // namespace

Observable Observable::parse(const std::string& text) {
  Observable obs;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream is(line);
    std::string coeff_tok;
    is >> coeff_tok;
    cplx coeff = parse_coeff(coeff_tok);
    std::vector<ParsedOp> ops;
    std::string tok;
    while (is >> tok) ops.push_back(parse_op_token(tok));
    if (ops.empty() || ops.size() > 2) {
      throw ValidationError("each term needs one or two operators: '" + line + "'");
    }
    if (ops.size() == 1) {
      obs.add(coeff, ops[0].site, ops[0].op);
    } else {
      obs.add(coeff, ops[0].site, ops[1].site, gates::two_site(ops[0].op, ops[1].op));
    }
  }
  return obs;
}

std::string Observable::to_text() const {
  std::ostringstream os;
  for (const auto& t : terms_) {
    os << format_coeff(t.coeff);
    if (t.sites.size() == 1) {
      os << "  " << format_op(t.op, t.sites[0]);
    } else {
      // Split the two-site operator back into a kron pair when possible;
      // otherwise emit both factors of its rank-1 SVD or fall back to raw.
      const std::size_t d = t.op.extent(0);
      Tensor m = t.op.permute({0, 2, 1, 3});
      SvdResult s = svd(m, 2);
      bool rank1 = true;
      for (std::size_t i = 1; i < s.s.size(); ++i) rank1 = rank1 && s.s[i] < 1e-12 * s.s[0];
      if (!rank1) {
        throw ValidationError("two-site term is not a product operator; cannot serialize");
      }
      Tensor a = decomp_detail::slice_last_axis(s.u, 1).reshape({d, d}) * s.s[0];
      Tensor b = decomp_detail::slice_first_axis(s.v, 1).reshape({d, d});
      os << "  " << format_op(a, t.sites[0]) << " " << format_op(b, t.sites[1]);
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Expectation values

namespace {

PepsState flip_vertical(const PepsState& s) {
  std::vector<Tensor> sites;
  sites.reserve(s.qubits());
  for (std::size_t r = s.rows(); r-- > 0;) {
    for (std::size_t c = 0; c < s.cols(); ++c) {
      sites.push_back(s.site(r, c).permute({0, 3, 2, 1, 4}));  // swap up/down
    }
  }
  return PepsState(s.rows(), s.cols(), s.phys_dim(), std::move(sites));
}

std::vector<TwoLayerBoundary> sweep_boundaries(const PepsState& s, const ContractOption& opt,
                                               std::uint64_t tag) {
  std::vector<TwoLayerBoundary> out;
  out.reserve(s.rows());
  out.push_back(two_layer_first_row(s, s));
  for (std::size_t r = 1; r < s.rows(); ++r) {
    out.push_back(two_layer_apply_row(out.back(), s, s, r, opt, tag));
  }
  return out;
}

/// Splits a two-site gate tensor (o1,o2,i1,i2) into pieces (o1,i1,g), (o2,i2,g).
std::pair<Tensor, Tensor> split_two_site(const Tensor& op) {
  const std::size_t d = op.extent(0);
  SvdResult s = svd(op.permute({0, 2, 1, 3}), 2);
  TruncationPolicy pol{d * d, 1e-14};
  std::size_t g = decomp_detail::retained_rank(s.s, pol);
  std::vector<double> w(s.s.begin(), s.s.begin() + g);
  for (auto& x : w) x = std::sqrt(x);
  Tensor left = decomp_detail::scale_last_axis(decomp_detail::slice_last_axis(s.u, g), w);
  Tensor right = decomp_detail::scale_first_axis(decomp_detail::slice_first_axis(s.v, g), w);
  // left: (o1, i1, g); right: (g, o2, i2) -> (o2, i2, g)
  return {left, right.permute({1, 2, 0})};
}

struct TermPieces {
  std::vector<InsertionPiece> pieces;
  std::size_t r0, r1, c0, c1;
};

TermPieces term_pieces(const LocalTerm& term) {
  TermPieces out;
  if (term.sites.size() == 1) {
    out.pieces.push_back({term.sites[0], term.op, {}});
    out.r0 = out.r1 = term.sites[0].row;
    out.c0 = out.c1 = term.sites[0].col;
    return out;
  }
  auto [left, right] = split_two_site(term.op);
  out.pieces.push_back({term.sites[0], left, {0}});
  out.pieces.push_back({term.sites[1], right, {0}});
  out.r0 = std::min(term.sites[0].row, term.sites[1].row);
  out.r1 = std::max(term.sites[0].row, term.sites[1].row);
  out.c0 = std::min(term.sites[0].col, term.sites[1].col);
  out.c1 = std::max(term.sites[0].col, term.sites[1].col);
  if (out.r1 - out.r0 > 1) {
    throw ValidationError("term spans more than two rows; only 1- and 2-site terms are supported");
  }
  return out;
}

}  // namespace

RowCache build_row_cache(const PepsState& s, const ContractOption& opt) {
  RowCache cache;
  cache.tops = sweep_boundaries(s, opt, kTagTop);
  PepsState flipped = flip_vertical(s);
  std::vector<TwoLayerBoundary> fb = sweep_boundaries(flipped, opt, kTagBottom);
  cache.bots.resize(s.rows());
  for (std::size_t k = 0; k < s.rows(); ++k) cache.bots[k] = fb[s.rows() - 1 - k];
  return cache;
}

ExpectationResult expectation(const PepsState& s, const Observable& obs,
                              const ExpectationOptions& opt) {
  for (const auto& t : obs.terms()) {
    for (Coord c : t.sites) s.check_coord(c);
  }
  if (!opt.allow_complex && !obs.is_hermitian()) {
    throw ValidationError(
        "observable is not Hermitian; request a complex expectation explicitly");
  }

  ExpectationResult out;
  std::uint64_t flops0 = instr::flops();
  const std::size_t n = s.rows();

  RowCache cache;
  if (opt.use_cache) {
    cache = build_row_cache(s, opt.contract);
    out.stats.full_sweeps = 2;
    out.norm_sq = chain_scalar(cache.tops[n - 1].mps).real();
  } else {
    std::vector<TwoLayerBoundary> tops = sweep_boundaries(s, opt.contract, kTagTop);
    out.norm_sq = chain_scalar(tops[n - 1].mps).real();
  }

  // Group terms per band for shared environments.
  std::map<std::pair<std::size_t, std::size_t>, BandEnvironment> envs;

  cplx sum = 0.0;
  for (const auto& term : obs.terms()) {
    TermPieces tp = term_pieces(term);
    const TwoLayerBoundary* top = nullptr;
    const TwoLayerBoundary* bottom = nullptr;
    std::vector<TwoLayerBoundary> local_top, local_bot;

    if (opt.use_cache) {
      if (tp.r0 > 0) top = &cache.tops[tp.r0 - 1];
      if (tp.r1 + 1 < n) bottom = &cache.bots[tp.r1 + 1];
    } else {
      // Recompute the needed boundaries with the same structural seeds.
      if (tp.r0 > 0) {
        local_top.push_back(two_layer_first_row(s, s));
        for (std::size_t r = 1; r < tp.r0; ++r) {
          local_top.push_back(two_layer_apply_row(local_top.back(), s, s, r, opt.contract,
                                                  kTagTop));
        }
        top = &local_top.back();
      }
      if (tp.r1 + 1 < n) {
        PepsState flipped = flip_vertical(s);
        local_bot.push_back(two_layer_first_row(flipped, flipped));
        for (std::size_t r = 1; r < n - 1 - tp.r1; ++r) {
          local_bot.push_back(two_layer_apply_row(local_bot.back(), flipped, flipped, r,
                                                  opt.contract, kTagBottom));
        }
        bottom = &local_bot.back();
      }
      out.stats.full_sweeps += 1;
    }

    cplx value;
    if (opt.shared_environments && opt.use_cache) {
      auto key = std::make_pair(tp.r0, tp.r1);
      auto it = envs.find(key);
      if (it == envs.end()) {
        it = envs.emplace(key, band_environment(top, s, s, tp.r0, tp.r1, bottom)).first;
        out.stats.band_contractions += 1;
      }
      value = band_splice(it->second, top, s, s, bottom, tp.pieces, tp.c0, tp.c1);
    } else {
      value = band_value(top, s, s, tp.r0, tp.r1, bottom, tp.pieces);
      out.stats.band_contractions += opt.use_cache ? 1 : 0;
    }
    sum += term.coeff * value;
  }

  out.raw_sum = sum;
  out.complex_value = sum / out.norm_sq;
  out.stats.flops = instr::flops() - flops0;
  if (!opt.allow_complex) {
    double scale = std::max(1.0, std::abs(out.complex_value));
    if (std::abs(out.complex_value.imag()) > 1e-8 * scale) {
      throw NumericalError("expectation of a Hermitian observable has imaginary part " +
                           std::to_string(out.complex_value.imag()));
    }
  }
  out.value = out.complex_value.real();
  return out;
}

double expectation_trotter(const PepsState& s, const Observable& obs, double tau,
                           const ExpectationOptions& opt, const UpdateOption& growth) {
  if (tau <= 0.0) throw ValidationError("tau must be positive");
  if (!obs.is_hermitian()) throw ValidationError("Trotter expectation needs a Hermitian observable");

  PepsState phi = s;
  for (const auto& term : obs.terms()) {
    if (term.sites.size() == 1) {
      Tensor h = term.op * term.coeff;
      Tensor gate = hermitian_function(h, [tau](double x) { return std::exp(tau * x); });
      phi = apply_one_site(phi, gate, term.sites[0]);
    } else {
      const std::size_t d = phi.phys_dim();
      Tensor h = term.op.reshape({d * d, d * d}) * term.coeff;
      Tensor gate = hermitian_function(h, [tau](double x) { return std::exp(tau * x); })
                        .reshape({d, d, d, d});
      Coord a = term.sites[0], b = term.sites[1];
      bool adjacent = (a.row == b.row && (a.col + 1 == b.col || b.col + 1 == a.col)) ||
                      (a.col == b.col && (a.row + 1 == b.row || b.row + 1 == a.row));
      std::size_t max_bond = phi.max_bond();
      if (growth.policy.max_rank != 0 && growth.policy.max_rank < d * max_bond) {
        throw ValidationError("bond-growth policy cannot hold an exact e^{tau H_j} application");
      }
      phi = adjacent ? apply_two_site(phi, gate, a, b, growth)
                     : apply_distant(phi, gate, a, b, growth);
    }
  }
  cplx num = contract_two_layer(s, phi, opt.contract);
  cplx den = contract_two_layer(s, s, opt.contract);
  return ((num - den) / (tau * den)).real();
}

}  // namespace peps
