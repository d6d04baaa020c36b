#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace peps {

using Objective = std::function<double(std::span<const double>)>;

struct OptimResult {
  std::vector<double> best_x;
  double best_f = 0.0;
  std::size_t evaluations = 0;
  /// Objective value of every evaluation, in order.
  std::vector<double> trace;
  std::string status;
};

struct OptimConfig {
  std::size_t max_evaluations = 500;
  double initial_step = 0.5;
  double tolerance = 1e-8;
};

/// Nelder-Mead downhill simplex with standard reflection/expansion/
/// contraction coefficients and shrink fallback.
OptimResult nelder_mead(const Objective& f, std::span<const double> x0, const OptimConfig& cfg);

/// Linear-approximation trust-region search in the COBYLA family
/// (unconstrained): keeps an interpolation simplex, fits a linear model by
/// solving the simplex system, and steps against the model gradient within
/// the trust radius, shrinking the radius when the model stops predicting
/// descent.
OptimResult cobyla_lite(const Objective& f, std::span<const double> x0, const OptimConfig& cfg);

OptimResult minimize(const std::string& method, const Objective& f, std::span<const double> x0,
                     const OptimConfig& cfg);

}  // namespace peps
