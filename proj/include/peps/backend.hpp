#pragma once

#include <string>

namespace peps {

/// Execution-engine descriptor.  All kernels consult the active backend; a
/// different engine (GPU, distributed) would slot in behind the same kernel
/// signatures.  With the same backend and seed every kernel is bitwise
/// reproducible.
struct Backend {
  std::string name = "cpu-blas";
  /// Forces serial reductions in the contraction kernel instead of BLAS,
  /// guaranteeing bitwise-identical results regardless of threading.
  bool strict_deterministic = false;
  /// BLAS thread count; 0 leaves the library default.
  int threads = 0;
};

const Backend& backend();
void set_backend(const Backend& b);

}  // namespace peps
