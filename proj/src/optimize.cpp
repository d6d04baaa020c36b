#include "peps/optimize.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "peps/errors.hpp"

namespace peps {

namespace {

struct Tracker {
  const Objective& f;
  OptimResult& res;
  std::size_t budget;

  double operator()(std::span<const double> x) {
    if (res.evaluations >= budget) throw budget_exhausted{};
    double v = f(x);
    res.evaluations += 1;
    res.trace.push_back(v);
    if (res.trace.size() == 1 || v < res.best_f) {
      res.best_f = v;
      res.best_x.assign(x.begin(), x.end());
    }
    return v;
  }

  struct budget_exhausted {};
};

}  // namespace

OptimResult nelder_mead(const Objective& f, std::span<const double> x0, const OptimConfig& cfg) {
  const std::size_t n = x0.size();
  OptimResult res;
  Tracker eval{f, res, cfg.max_evaluations};
  res.status = "max-evaluations";

  std::vector<std::vector<double>> pts(n + 1, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> fv(n + 1);
  try {
    for (std::size_t i = 1; i <= n; ++i) pts[i][i - 1] += cfg.initial_step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    while (true) {
      std::vector<std::size_t> order(n + 1);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      std::vector<std::vector<double>> spts(n + 1);
      std::vector<double> sfv(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        spts[i] = pts[order[i]];
        sfv[i] = fv[order[i]];
      }
      pts = std::move(spts);
      fv = std::move(sfv);

      if (std::abs(fv[n] - fv[0]) < cfg.tolerance * (std::abs(fv[0]) + cfg.tolerance)) {
        res.status = "converged";
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
      }
      auto blend = [&](double t) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + t * (pts[n][j] - centroid[j]);
        return x;
      };

      std::vector<double> xr = blend(-1.0);
      double fr = eval(xr);
      if (fr < fv[0]) {
        std::vector<double> xe = blend(-2.0);
        double fe = eval(xe);
        if (fe < fr) {
          pts[n] = xe;
          fv[n] = fe;
        } else {
          pts[n] = xr;
          fv[n] = fr;
        }
      } else if (fr < fv[n - 1]) {
        pts[n] = xr;
        fv[n] = fr;
      } else {
        std::vector<double> xc = blend(fr < fv[n] ? -0.5 : 0.5);
        double fc = eval(xc);
        if (fc < std::min(fr, fv[n])) {
          pts[n] = xc;
          fv[n] = fc;
        } else {
          for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
            fv[i] = eval(pts[i]);
          }
        }
      }
    }
  } catch (Tracker::budget_exhausted&) {
  }
  return res;
}

OptimResult cobyla_lite(const Objective& f, std::span<const double> x0, const OptimConfig& cfg) {
  const std::size_t n = x0.size();
  OptimResult res;
  Tracker eval{f, res, cfg.max_evaluations};
  res.status = "max-evaluations";

  double rho = cfg.initial_step;
  const double rho_end = std::max(cfg.tolerance, 1e-10);

  std::vector<std::vector<double>> pts(n + 1, std::vector<double>(x0.begin(), x0.end()));
  std::vector<double> fv(n + 1);
  try {
    for (std::size_t i = 1; i <= n; ++i) pts[i][i - 1] += rho;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    while (rho > rho_end) {
      // Best vertex first.
      std::size_t best = 0;
      for (std::size_t i = 1; i <= n; ++i) {
        if (fv[i] < fv[best]) best = i;
      }
      std::swap(pts[0], pts[best]);
      std::swap(fv[0], fv[best]);

      // Fit the linear model f(x0 + d) = f0 + g.d from the simplex edges.
      std::vector<double> a(n * n);
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = pts[i + 1][j] - pts[0][j];
        g[i] = fv[i + 1] - fv[0];
      }
      std::vector<lapack_int> piv(n);
      int info = LAPACKE_dgesv(LAPACK_ROW_MAJOR, static_cast<lapack_int>(n), 1, a.data(),
                               static_cast<lapack_int>(n), piv.data(), g.data(), 1);
      if (info != 0) {
        // Degenerate simplex: rebuild around the best point.
        for (std::size_t i = 1; i <= n; ++i) {
          pts[i] = pts[0];
          pts[i][i - 1] += rho;
          fv[i] = eval(pts[i]);
        }
        continue;
      }
      double gnorm = 0.0;
      for (double v : g) gnorm += v * v;
      gnorm = std::sqrt(gnorm);
      if (gnorm < 1e-14) {
        rho *= 0.5;
        continue;
      }

      std::vector<double> xt(n);
      for (std::size_t j = 0; j < n; ++j) xt[j] = pts[0][j] - rho * g[j] / gnorm;
      double ft = eval(xt);

      if (ft < fv[0]) {
        // Replace the worst vertex and keep the radius.
        std::size_t worst = 0;
        for (std::size_t i = 1; i <= n; ++i) {
          if (fv[i] > fv[worst]) worst = i;
        }
        pts[worst] = xt;
        fv[worst] = ft;
      } else {
        rho *= 0.5;
        // Refresh the simplex scale around the best point.
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
          }
          fv[i] = eval(pts[i]);
        }
      }
    }
    res.status = "converged";
  } catch (Tracker::budget_exhausted&) {
  }
  return res;
}

OptimResult minimize(const std::string& method, const Objective& f, std::span<const double> x0,
                     const OptimConfig& cfg) {
  if (method == "nelder-mead") return nelder_mead(f, x0, cfg);
  if (method == "cobyla") return cobyla_lite(f, x0, cfg);
  throw ConfigError("unknown optimizer '" + method + "' (use nelder-mead or cobyla)");
}

}  // namespace peps
