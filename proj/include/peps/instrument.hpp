#pragma once

#include <atomic>
#include <cstdint>

namespace peps::instr {

/// Global cost counters.
///
/// flops: every elementary pairwise contraction adds 2 * (product of all
/// bound and free extents) -- the classic GEMM count, with a complex
/// multiply-add counted as two flops.  Truncated factorizations add standard
/// dense-kernel counts (see linalg.cpp).
///
/// peak_elements: high-water mark of the element count of any tensor created
/// as a contraction intermediate, materialized operator, random probe or
/// factor output.  Scratch permutation buffers are not counted; they shadow
/// an already-counted tensor.
struct Counters {
  std::atomic<std::uint64_t> flops{0};
  std::atomic<std::uint64_t> peak_elements{0};
  std::atomic<std::uint64_t> einsumsvd_flops{0};
};

inline Counters& counters() {
  static Counters c;
  return c;
}

inline void reset() {
  counters().flops.store(0);
  counters().peak_elements.store(0);
  counters().einsumsvd_flops.store(0);
}

inline void add_flops(std::uint64_t n) {
  counters().flops.fetch_add(n, std::memory_order_relaxed);
}

inline void record_intermediate(std::uint64_t elements) {
  auto& peak = counters().peak_elements;
  std::uint64_t cur = peak.load(std::memory_order_relaxed);
  while (cur < elements && !peak.compare_exchange_weak(cur, elements)) {
  }
}

inline std::uint64_t flops() { return counters().flops.load(); }
inline std::uint64_t peak_elements() { return counters().peak_elements.load(); }
inline std::uint64_t einsumsvd_flops() { return counters().einsumsvd_flops.load(); }

/// Accumulates the flops spent between construction and destruction into the
/// dedicated einsumsvd counter.  Drivers are single-threaded orchestrators,
/// so nesting scopes on one thread is well defined.
class EinsumsvdScope {
 public:
  EinsumsvdScope() : start_(flops()) {}
  ~EinsumsvdScope() {
    counters().einsumsvd_flops.fetch_add(flops() - start_, std::memory_order_relaxed);
  }
  EinsumsvdScope(const EinsumsvdScope&) = delete;
  EinsumsvdScope& operator=(const EinsumsvdScope&) = delete;

 private:
  std::uint64_t start_;
};

}  // namespace peps::instr
