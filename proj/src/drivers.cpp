#include "peps/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"
#include "peps/linalg.hpp"
#include "peps/rng.hpp"

namespace peps {

namespace {

using nlohmann::ordered_json;

std::vector<int> initial_bits(const std::string& kind, std::size_t rows, std::size_t cols) {
  std::vector<int> bits(rows * cols, 0);
  if (kind == "neel") {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) bits[r * cols + c] = static_cast<int>((r + c) % 2);
    }
  } else if (kind != "zeros") {
    throw ConfigError("unknown initial state '" + kind + "' (use neel or zeros)");
  }
  return bits;
}

ContractOption energy_contract_option(ContractFamily family, std::size_t m, int rsvd_iters,
                                      std::uint64_t seed) {
  ContractOption opt;
  opt.family = family;
  opt.trunc.max_rank = m;
  opt.strategy = family == ContractFamily::bmps || family == ContractFamily::exact
                     ? SvdStrategy::exact
                     : SvdStrategy::implicit_rsvd;
  opt.rsvd.power_iters = rsvd_iters;
  opt.seed = seed;
  return opt;
}

double state_energy(const PepsState& s, const Observable& h, ContractFamily family, std::size_t m,
                    int rsvd_iters, std::uint64_t seed) {
  ExpectationOptions opt;
  opt.contract = energy_contract_option(family, m, rsvd_iters, seed);
  opt.use_cache = true;
  opt.shared_environments = true;
  return expectation(s, h, opt).value;
}

/// Applies e^{-tau H_j} for one local term to the state.
PepsState apply_ite_term(const PepsState& s, const LocalTerm& term, double tau,
                         const UpdateOption& opt) {
  if (term.sites.size() == 1) {
    Tensor h = term.op * term.coeff;
    Tensor gate = hermitian_function(h, [tau](double x) { return std::exp(-tau * x); });
    return apply_one_site(s, gate, term.sites[0]);
  }
  const std::size_t d = s.phys_dim();
  Tensor h = term.op.reshape({d * d, d * d}) * term.coeff;
  Tensor gate =
      hermitian_function(h, [tau](double x) { return std::exp(-tau * x); }).reshape({d, d, d, d});
  Coord a = term.sites[0], b = term.sites[1];
  bool adjacent = (a.row == b.row && (a.col + 1 == b.col || b.col + 1 == a.col)) ||
                  (a.col == b.col && (a.row + 1 == b.row || b.row + 1 == a.row));
  return adjacent ? apply_two_site(s, gate, a, b, opt) : apply_distant(s, gate, a, b, opt);
}

}  // namespace

IteOutcome run_ite(const IteConfig& cfg) {
  if (cfg.tau <= 0) throw ConfigError("tau must be positive");
  if (cfg.evolution_rank < 1 || cfg.contraction_rank < 1) throw ConfigError("ranks must be >= 1");
  std::vector<int> bits = initial_bits(cfg.initial, cfg.rows, cfg.cols);
  PepsState state = PepsState::computational_basis(cfg.rows, cfg.cols, bits);

  UpdateOption update;
  update.policy = TruncationPolicy{cfg.evolution_rank, 1e-14};
  update.strategy = cfg.update;

  IteOutcome out{{}, state};
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    for (const auto& term : cfg.hamiltonian.terms()) {
      state = apply_ite_term(state, term, cfg.tau, update);
    }
    if (step % std::max<std::size_t>(1, cfg.energy_every) == 0 || step == cfg.steps) {
      double e = state_energy(state, cfg.hamiltonian, cfg.family, cfg.contraction_rank,
                              cfg.rsvd_iters, derive_seed(cfg.seed, 0xE, step));
      out.energies.emplace_back(step, e);
    }
  }
  out.state = std::move(state);
  return out;
}

PepsState vqe_ansatz_state(const VqeConfig& cfg, std::span<const double> theta) {
  if (theta.size() != cfg.layers * cfg.rows * cfg.cols) {
    throw ConfigError("theta length must be layers * rows * cols");
  }
  std::vector<int> zeros(cfg.rows * cfg.cols, 0);
  PepsState state = PepsState::computational_basis(cfg.rows, cfg.cols, zeros);
  UpdateOption update;
  update.policy = TruncationPolicy{cfg.evolution_rank, 1e-14};
  update.strategy = cfg.update;
  Tensor cnot = gates::CNOT();

  std::size_t p = 0;
  for (std::size_t layer = 0; layer < cfg.layers; ++layer) {
    for (std::size_t r = 0; r < cfg.rows; ++r) {
      for (std::size_t c = 0; c < cfg.cols; ++c) {
        state = apply_one_site(state, gates::Ry(theta[p++]), {r, c});
      }
    }
    // CNOTs on every nearest-neighbor pair: horizontal row-major (control on
    // the left), then vertical (control on top).
    for (std::size_t r = 0; r < cfg.rows; ++r) {
      for (std::size_t c = 0; c + 1 < cfg.cols; ++c) {
        state = apply_two_site(state, cnot, {r, c}, {r, c + 1}, update);
      }
    }
    for (std::size_t r = 0; r + 1 < cfg.rows; ++r) {
      for (std::size_t c = 0; c < cfg.cols; ++c) {
        state = apply_two_site(state, cnot, {r, c}, {r + 1, c}, update);
      }
    }
  }
  return state;
}

VqeOutcome run_vqe(const VqeConfig& cfg) {
  const std::size_t n_params = cfg.layers * cfg.rows * cfg.cols;
  std::vector<double> theta0 = cfg.theta0;
  if (theta0.empty()) {
    theta0.resize(n_params, 0.0);
    SplitMix64 gen(derive_seed(cfg.seed, 0x7E));
    if (cfg.init == "random") {
      for (auto& t : theta0) t = M_PI * gen.next_symmetric();
    } else if (cfg.init == "neel") {
      // First layer rotates the checkerboard to |1>, later layers start near
      // the identity; a small seeded perturbation separates restarts.
      for (std::size_t layer = 0; layer < cfg.layers; ++layer) {
        for (std::size_t r = 0; r < cfg.rows; ++r) {
          for (std::size_t c = 0; c < cfg.cols; ++c) {
            double base = (layer == 0 && (r + c) % 2 == 1) ? M_PI : 0.0;
            theta0[layer * cfg.rows * cfg.cols + r * cfg.cols + c] =
                base + 0.2 * gen.next_symmetric();
          }
        }
      }
    } else {
      throw ConfigError("unknown vqe init '" + cfg.init + "' (use random or neel)");
    }
  }
  if (theta0.size() != n_params) throw ConfigError("theta length must be layers * rows * cols");

  if (cfg.layers == 0) {
    std::vector<int> zeros(cfg.rows * cfg.cols, 0);
    PepsState state = PepsState::computational_basis(cfg.rows, cfg.cols, zeros);
    double e = state_energy(state, cfg.hamiltonian, cfg.family, cfg.contraction_rank,
                            cfg.rsvd_iters, derive_seed(cfg.seed, 0xF));
    return VqeOutcome{e, {}, {e}, {e}, 1};
  }

  Objective objective = [&](std::span<const double> theta) {
    PepsState state = vqe_ansatz_state(cfg, theta);
    return state_energy(state, cfg.hamiltonian, cfg.family, cfg.contraction_rank, cfg.rsvd_iters,
                        derive_seed(cfg.seed, 0xF));
  };

  OptimConfig oc;
  oc.max_evaluations = cfg.max_evaluations;
  oc.tolerance = cfg.tolerance;
  oc.initial_step = cfg.initial_step;
  OptimResult r = minimize(cfg.optimizer, objective, theta0, oc);

  VqeOutcome out;
  out.best_energy = r.best_f;
  out.best_theta = r.best_x;
  out.trace = r.trace;
  out.evaluations = r.evaluations;
  double running = r.trace.empty() ? 0.0 : r.trace[0];
  for (double v : r.trace) {
    running = std::min(running, v);
    out.running_minimum.push_back(running);
  }
  return out;
}

PepsState run_rqc(const RqcConfig& cfg) {
  // depth 0 degenerates to the basis state
  std::vector<int> zeros(cfg.rows * cfg.cols, 0);
  PepsState state = PepsState::computational_basis(cfg.rows, cfg.cols, zeros);

  UpdateOption exact_update;
  exact_update.policy =
      TruncationPolicy{cfg.max_bond == 0 ? SIZE_MAX : cfg.max_bond, 0.0};
  exact_update.strategy = UpdateStrategy::qr_svd_gram;
  Tensor iswap = gates::ISWAP();
  const Tensor singles[3] = {gates::sqrtX(), gates::sqrtY(), gates::sqrtW()};

  SplitMix64 gen(derive_seed(cfg.seed, 0x1C));
  std::vector<int> last(cfg.rows * cfg.cols, -1);
  for (std::size_t layer = 1; layer <= cfg.depth; ++layer) {
    for (std::size_t r = 0; r < cfg.rows; ++r) {
      for (std::size_t c = 0; c < cfg.cols; ++c) {
        // Uniform over the gate set, avoiding immediate repetition per site.
        int pick;
        do {
          pick = static_cast<int>(gen.next_u64() % 3);
        } while (pick == last[r * cfg.cols + c]);
        last[r * cfg.cols + c] = pick;
        state = apply_one_site(state, singles[pick], {r, c});
      }
    }
    if (layer % 4 == 0) {
      for (std::size_t r = 0; r < cfg.rows; ++r) {
        for (std::size_t c = 0; c + 1 < cfg.cols; ++c) {
          state = apply_two_site(state, iswap, {r, c}, {r, c + 1}, exact_update);
        }
      }
      for (std::size_t r = 0; r + 1 < cfg.rows; ++r) {
        for (std::size_t c = 0; c < cfg.cols; ++c) {
          state = apply_two_site(state, iswap, {r, c}, {r + 1, c}, exact_update);
        }
      }
    }
  }
  return state;
}

RqcSweep rqc_error_sweep(const RqcConfig& cfg, std::span<const std::size_t> m_list,
                         std::size_t exact_budget) {
  RqcSweep sweep;
  PepsState state = run_rqc(cfg);
  sweep.bits.assign(cfg.rows * cfg.cols, 0);

  OneLayerGrid projected = project_to_one_layer(state, sweep.bits);
  sweep.exact_value = contract_exact(projected, exact_budget);
  double scale = std::abs(sweep.exact_value);
  if (scale == 0.0) throw NumericalError("exact amplitude vanished; cannot form relative errors");

  for (std::size_t m : m_list) {
    RqcSweepPoint pt;
    pt.m = m;
    ContractOption bmps = ContractOption::bmps_opt(m, derive_seed(cfg.seed, 0xB, m));
    cplx vb = contract_one_layer(projected, bmps, &pt.report_bmps);
    ContractOption ibmps = ContractOption::ibmps_opt(m, derive_seed(cfg.seed, 0xB, m));
    cplx vi = contract_one_layer(projected, ibmps, &pt.report_ibmps);
    pt.err_bmps = std::abs(vb - sweep.exact_value) / scale;
    pt.err_ibmps = std::abs(vi - sweep.exact_value) / scale;
    sweep.points.push_back(std::move(pt));
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// JSON front ends

namespace {

ordered_json parse_config(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Recover line/column from the byte offset for a usable message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config JSON parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
}

void require_schema(const ordered_json& j) {
  if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"] != 1) {
    throw ConfigError("config must declare \"schema\": 1");
  }
}

Observable hamiltonian_from_json(const ordered_json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_object()) throw ConfigError("hamiltonian must be an object");
  std::string type = j.value("type", "j1j2");
  if (type == "j1j2") {
    auto triple = [&](const char* key, double fallback) -> std::array<double, 3> {
      if (!j.contains(key)) return {fallback, fallback, fallback};
      const auto& v = j.at(key);
      if (v.is_number()) return {v.get<double>(), v.get<double>(), v.get<double>()};
      if (v.is_array() && v.size() == 3) return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      throw ConfigError(std::string("hamiltonian.") + key + " must be a number or [x,y,z]");
    };
    return build_j1j2(rows, cols, triple("j1", 1.0), triple("j2", 0.0), triple("h", 0.0));
  }
  if (type == "text") {
    if (!j.contains("terms")) throw ConfigError("hamiltonian.terms missing");
    return Observable::parse(j.at("terms").get<std::string>());
  }
  throw ConfigError("unknown hamiltonian type '" + type + "'");
}

ContractFamily family_from_string(const std::string& s) {
  if (s == "exact") return ContractFamily::exact;
  if (s == "bmps") return ContractFamily::bmps;
  if (s == "ibmps") return ContractFamily::ibmps;
  if (s == "two-layer-ibmps") return ContractFamily::two_layer_ibmps;
  throw ConfigError("unknown contraction family '" + s + "'");
}

UpdateStrategy update_from_string(const std::string& s) {
  if (s == "direct") return UpdateStrategy::direct;
  if (s == "qr-svd") return UpdateStrategy::qr_svd;
  if (s == "qr-svd-gram") return UpdateStrategy::qr_svd_gram;
  throw ConfigError("unknown update strategy '" + s + "'");
}

ordered_json result_skeleton(const std::string& command, const ordered_json& cfg) {
  ordered_json doc;
  doc["schema"] = 1;
  doc["command"] = command;
  doc["config"] = cfg;
  doc["results"] = ordered_json::object();
  doc["instrumentation"] = ordered_json::array();
  doc["versions"] = {{"peps2d", "1.0.0"}, {"result_format", 1}};
  return doc;
}

ordered_json report_json(const ContractionReport& r) {
  return ordered_json::parse(r.to_json());
}

}  // namespace

std::string run_ite_json(const std::string& config_json) {
  auto t0 = std::chrono::steady_clock::now();
  ordered_json j = parse_config(config_json);
  require_schema(j);
  IteConfig cfg;
  cfg.rows = j.value("rows", 4);
  cfg.cols = j.value("cols", 4);
  cfg.tau = j.value("tau", 0.02);
  cfg.steps = j.value("steps", 150);
  cfg.evolution_rank = j.value("evolution_rank", 2);
  cfg.contraction_rank = j.value("contraction_rank", 4);
  cfg.family = family_from_string(j.value("family", "two-layer-ibmps"));
  cfg.rsvd_iters = j.value("rsvd_iters", 1);
  cfg.energy_every = j.value("energy_every", 1);
  cfg.initial = j.value("initial", "neel");
  cfg.update = update_from_string(j.value("update", "qr-svd-gram"));
  cfg.seed = j.value("seed", 0);
  if (!j.contains("hamiltonian")) throw ConfigError("ite config needs a hamiltonian");
  cfg.hamiltonian = hamiltonian_from_json(j.at("hamiltonian"), cfg.rows, cfg.cols);

  instr::reset();
  IteOutcome out = run_ite(cfg);

  ordered_json doc = result_skeleton("ite", j);
  ordered_json energies = ordered_json::array();
  for (auto [step, e] : out.energies) {
    energies.push_back({{"step", step}, {"energy", e}, {"energy_per_site", e / (cfg.rows * cfg.cols)}});
  }
  doc["results"]["energies"] = energies;
  doc["results"]["final_energy"] = out.energies.empty() ? 0.0 : out.energies.back().second;
  doc["results"]["final_max_bond"] = out.state.max_bond();
  doc["results"]["flops"] = instr::flops();
  doc["results"]["peak_intermediate_elements"] = instr::peak_elements();
  doc["timing"] = {{"seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return doc.dump(2);
}

std::string run_vqe_json(const std::string& config_json) {
  auto t0 = std::chrono::steady_clock::now();
  ordered_json j = parse_config(config_json);
  require_schema(j);
  VqeConfig cfg;
  cfg.rows = j.value("rows", 4);
  cfg.cols = j.value("cols", 4);
  cfg.layers = j.value("layers", 2);
  if (j.contains("theta0")) cfg.theta0 = j.at("theta0").get<std::vector<double>>();
  cfg.init = j.value("init", "random");
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    cfg.optimizer = o.value("name", "nelder-mead");
    cfg.max_evaluations = o.value("max_evaluations", 300);
    cfg.tolerance = o.value("tolerance", 1e-6);
    cfg.initial_step = o.value("initial_step", 0.4);
  }
  cfg.evolution_rank = j.value("evolution_rank", 2);
  cfg.contraction_rank = j.value("contraction_rank", 16);
  cfg.family = family_from_string(j.value("family", "two-layer-ibmps"));
  cfg.rsvd_iters = j.value("rsvd_iters", 1);
  cfg.update = update_from_string(j.value("update", "qr-svd-gram"));
  cfg.seed = j.value("seed", 0);
  if (!j.contains("hamiltonian")) throw ConfigError("vqe config needs a hamiltonian");
  cfg.hamiltonian = hamiltonian_from_json(j.at("hamiltonian"), cfg.rows, cfg.cols);

  instr::reset();
  VqeOutcome out = run_vqe(cfg);

  ordered_json doc = result_skeleton("vqe", j);
  doc["results"]["best_energy"] = out.best_energy;
  doc["results"]["best_energy_per_site"] = out.best_energy / (cfg.rows * cfg.cols);
  doc["results"]["best_theta"] = out.best_theta;
  doc["results"]["evaluations"] = out.evaluations;
  doc["results"]["trace"] = out.trace;
  doc["results"]["running_minimum"] = out.running_minimum;
  doc["results"]["flops"] = instr::flops();
  doc["timing"] = {{"seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return doc.dump(2);
}

std::string run_rqc_bench_json(const std::string& config_json) {
  auto t0 = std::chrono::steady_clock::now();
  ordered_json j = parse_config(config_json);
  require_schema(j);
  RqcConfig cfg;
  cfg.rows = j.value("rows", 4);
  cfg.cols = j.value("cols", 4);
  cfg.depth = j.value("depth", 8);
  cfg.seed = j.value("seed", 0);
  std::vector<std::size_t> m_list = j.value("m_list", std::vector<std::size_t>{4, 8, 16, 32, 64});
  std::size_t budget = j.value("exact_budget", std::size_t(1) << 27);

  instr::reset();
  RqcSweep sweep = rqc_error_sweep(cfg, m_list, budget);

  ordered_json doc = result_skeleton("rqc-bench", j);
  doc["results"]["exact_value_re"] = sweep.exact_value.real();
  doc["results"]["exact_value_im"] = sweep.exact_value.imag();
  ordered_json pts = ordered_json::array();
  for (const auto& p : sweep.points) {
    ordered_json pj;
    pj["m"] = p.m;
    pj["err_bmps"] = p.err_bmps;
    pj["err_ibmps"] = p.err_ibmps;
    pj["report_bmps"] = report_json(p.report_bmps);
    pj["report_ibmps"] = report_json(p.report_ibmps);
    pts.push_back(pj);
    doc["instrumentation"].push_back(report_json(p.report_bmps));
    doc["instrumentation"].push_back(report_json(p.report_ibmps));
  }
  doc["results"]["points"] = pts;
  doc["timing"] = {{"seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return doc.dump(2);
}

std::string run_contract_bench_csv(const std::string& config_json, std::string* result_json) {
  auto t0 = std::chrono::steady_clock::now();
  ordered_json j = parse_config(config_json);
  require_schema(j);
  std::size_t rows = j.value("rows", 4);
  std::size_t cols = j.value("cols", rows);
  std::size_t bond = j.value("bond", 4);
  std::uint64_t seed = j.value("seed", 0);
  std::vector<std::size_t> m_list = j.value("m_list", std::vector<std::size_t>{4, 8, 16});
  std::vector<std::string> families = j.value("families", std::vector<std::string>{"bmps", "ibmps"});
  std::size_t budget = j.value("exact_budget", std::size_t(1) << 27);

  OneLayerGrid grid = OneLayerGrid::random(rows, cols, bond, derive_seed(seed, 0xC));
  cplx exact;
  bool have_exact = true;
  try {
    exact = contract_exact(grid, budget);
  } catch (const ResourceError&) {
    have_exact = false;
  }

  std::ostringstream csv;
  csv << "family,n,r,m,flops,peak_elements,rel_error,seconds\n";
  ordered_json doc = result_skeleton("contract-bench", j);
  ordered_json rows_json = ordered_json::array();
  for (const auto& fam : families) {
    for (std::size_t m : m_list) {
      ContractOption opt = fam == "ibmps" ? ContractOption::ibmps_opt(m, derive_seed(seed, 0xD, m))
                                          : ContractOption::bmps_opt(m, derive_seed(seed, 0xD, m));
      if (fam != "ibmps" && fam != "bmps") throw ConfigError("contract-bench family must be bmps|ibmps");
      instr::reset();
      ContractionReport rep;
      cplx v = contract_one_layer(grid, opt, &rep);
      double rel = have_exact ? std::abs(v - exact) / std::abs(exact)
                              : std::numeric_limits<double>::quiet_NaN();
      csv << fam << "," << rows << "," << bond << "," << m << "," << rep.flops << ","
          << rep.peak_intermediate_elements << "," << rel << "," << rep.seconds << "\n";
      ordered_json rj = report_json(rep);
      rj["rel_error"] = rel;
      rows_json.push_back(rj);
      doc["instrumentation"].push_back(report_json(rep));
    }
  }
  doc["results"]["rows"] = rows_json;
  doc["results"]["have_exact"] = have_exact;
  doc["timing"] = {{"seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  if (result_json) *result_json = doc.dump(2);
  return csv.str();
}

std::string run_expect_json(const std::string& config_json) {
  auto t0 = std::chrono::steady_clock::now();
  ordered_json j = parse_config(config_json);
  require_schema(j);
  if (!j.contains("state")) throw ConfigError("expect config needs a state file path");
  PepsState state = load_peps(j.at("state").get<std::string>());
  Observable obs;
  if (j.contains("hamiltonian")) {
    obs = hamiltonian_from_json(j.at("hamiltonian"), state.rows(), state.cols());
  } else if (j.contains("observable_file")) {
    std::ifstream f(j.at("observable_file").get<std::string>());
    if (!f) throw ConfigError("cannot open observable file");
    std::stringstream ss;
    ss << f.rdbuf();
    obs = Observable::parse(ss.str());
  } else {
    throw ConfigError("expect config needs hamiltonian or observable_file");
  }

  ExpectationOptions opt;
  opt.contract = energy_contract_option(family_from_string(j.value("family", "two-layer-ibmps")),
                                        j.value("m", 16), j.value("rsvd_iters", 1),
                                        j.value("seed", 0));
  opt.use_cache = j.value("use_cache", true);
  opt.shared_environments = j.value("shared_environments", false);

  instr::reset();
  ExpectationResult r = expectation(state, obs, opt);

  ordered_json doc = result_skeleton("expect", j);
  doc["results"]["value"] = r.value;
  doc["results"]["value_per_site"] = r.value / (state.rows() * state.cols());
  doc["results"]["raw_sum_re"] = r.raw_sum.real();
  doc["results"]["raw_sum_im"] = r.raw_sum.imag();
  doc["results"]["norm_sq"] = r.norm_sq;
  doc["results"]["full_sweeps"] = r.stats.full_sweeps;
  doc["results"]["band_contractions"] = r.stats.band_contractions;
  doc["results"]["flops"] = r.stats.flops;
  doc["timing"] = {{"seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return doc.dump(2);
}

}  // namespace peps
