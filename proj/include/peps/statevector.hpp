#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "peps/observables.hpp"
#include "peps/state.hpp"
#include "peps/tensor.hpp"

namespace peps {

/// Exact dense simulator for small lattices.  Qubit k sits at lattice site
/// (k / cols, k % cols); basis index bit order puts qubit 0 most significant,
/// so index(bits) reads the bit string left to right.
class StateVector {
 public:
  StateVector(std::size_t qubits, std::vector<cplx> amps);
  static StateVector basis(std::size_t qubits, std::span<const int> bits);

  std::size_t qubits() const { return qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const cplx> amps() const { return amps_; }
  std::span<cplx> amps() { return amps_; }
  cplx amplitude(std::span<const int> bits) const;

  double norm() const;
  void normalize();

 private:
  std::size_t qubits_;
  std::vector<cplx> amps_;
};

/// Materializes a PEPS into the full amplitude vector (row-major site order).
StateVector from_peps(const PepsState& s, std::size_t budget_amplitudes = std::size_t(1) << 20);

StateVector apply_gate(const StateVector& sv, const Tensor& gate, std::size_t q);
StateVector apply_gate(const StateVector& sv, const Tensor& gate, std::size_t q1, std::size_t q2);

cplx sv_inner(const StateVector& a, const StateVector& b);

/// <psi|H|psi> / <psi|psi> and the unnormalized sum.
struct SvExpectation {
  double value = 0.0;
  cplx raw_sum;
  double norm_sq = 0.0;
};
SvExpectation sv_expectation(const StateVector& sv, const Observable& obs, std::size_t cols);

enum class IteMode { trotter, dense };

struct IteResult {
  StateVector state;
  std::vector<double> energies;  // Rayleigh quotient after each step
};

/// Imaginary time evolution.  Trotter mode applies e^{-tau H_j} termwise in
/// the observable's order (mirroring the PEPS driver); dense mode
/// eigendecomposes the full Hamiltonian (small lattices only) and is exactly
/// monotone in energy.
IteResult exact_ite(const StateVector& sv, const Observable& obs, std::size_t cols, double tau,
                    std::size_t steps, IteMode mode = IteMode::trotter);

/// Dense matrix of the observable on 2^N dimensions (N <= ~12).
Tensor dense_hamiltonian(const Observable& obs, std::size_t rows, std::size_t cols);

}  // namespace peps
