#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peps/contraction.hpp"
#include "peps/observables.hpp"
#include "peps/optimize.hpp"
#include "peps/state.hpp"

namespace peps {

struct IteConfig {
  std::size_t rows = 4, cols = 4;
  Observable hamiltonian;
  double tau = 0.02;
  std::size_t steps = 150;
  std::size_t evolution_rank = 2;    // r: two-site update bond cap
  std::size_t contraction_rank = 4;  // m: boundary truncation for energies
  ContractFamily family = ContractFamily::two_layer_ibmps;
  int rsvd_iters = 1;
  std::size_t energy_every = 1;  // record the energy every k steps (and at the end)
  std::string initial = "neel";  // neel | zeros
  UpdateStrategy update = UpdateStrategy::qr_svd_gram;
  std::uint64_t seed = 0;
};

struct IteOutcome {
  std::vector<std::pair<std::size_t, double>> energies;  // (step, energy)
  PepsState state;
};

IteOutcome run_ite(const IteConfig& cfg);

struct VqeConfig {
  std::size_t rows = 4, cols = 4;
  Observable hamiltonian;
  std::size_t layers = 2;
  std::vector<double> theta0;    // empty: initialize from seed per `init`
  std::string init = "random";   // random (uniform [-pi, pi]) | neel
  std::string optimizer = "nelder-mead";
  std::size_t max_evaluations = 300;
  double tolerance = 1e-6;
  double initial_step = 0.4;
  std::size_t evolution_rank = 2;
  std::size_t contraction_rank = 16;
  ContractFamily family = ContractFamily::two_layer_ibmps;
  int rsvd_iters = 1;
  UpdateStrategy update = UpdateStrategy::qr_svd_gram;
  std::uint64_t seed = 0;
};

struct VqeOutcome {
  double best_energy = 0.0;
  std::vector<double> best_theta;
  std::vector<double> trace;           // every objective evaluation
  std::vector<double> running_minimum; // non-increasing by construction
  std::size_t evaluations = 0;
};

VqeOutcome run_vqe(const VqeConfig& cfg);

/// One ansatz evaluation: L layers of [Ry(theta) per site, CNOT on every
/// nearest-neighbor pair] on |0...0>, truncated at the evolution rank.
PepsState vqe_ansatz_state(const VqeConfig& cfg, std::span<const double> theta);

struct RqcConfig {
  std::size_t rows = 4, cols = 4;
  std::size_t depth = 8;  // iSWAP round on every neighbor pair after each 4th layer
  std::uint64_t seed = 0;
  std::size_t max_bond = 0;  // 0: exact evolution
};

PepsState run_rqc(const RqcConfig& cfg);

struct RqcSweepPoint {
  std::size_t m = 0;
  double err_bmps = 0.0, err_ibmps = 0.0;
  ContractionReport report_bmps, report_ibmps;
};

struct RqcSweep {
  cplx exact_value;
  std::vector<int> bits;
  std::vector<RqcSweepPoint> points;
};

/// Computes one amplitude exactly and with BMPS/IBMPS at each m, reporting
/// relative errors.
RqcSweep rqc_error_sweep(const RqcConfig& cfg, std::span<const std::size_t> m_list,
                         std::size_t exact_budget = std::size_t(1) << 27);

// JSON front ends (configs and result documents as JSON text).
std::string run_ite_json(const std::string& config_json);
std::string run_vqe_json(const std::string& config_json);
std::string run_rqc_bench_json(const std::string& config_json);
std::string run_contract_bench_csv(const std::string& config_json, std::string* result_json);
std::string run_expect_json(const std::string& config_json);

}  // namespace peps
