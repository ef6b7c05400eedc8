#pragma once

#include <functional>

namespace nlsgd {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 0.0;
  int max_intervals = 2000;
};

struct QuadratureResult {
  double value = 0;
  double abs_error = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Globally adaptive 15-point Gauss-Kronrod quadrature on a finite [a, b].
/// The interval with the largest error estimate is bisected until the summed
/// estimate meets max(abs_tol, rel_tol * |value|) or max_intervals is hit.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts = {});

/// Integral of f over [lo, hi] with 0 <= lo < hi, computed in the variable
/// s = log(1 + u). Power-law integrands become exponentially decaying in s,
/// so very long intervals cost only a few subdivisions.
QuadratureResult integrate_log_substituted(const std::function<double(double)>& f, double lo,
                                           double hi, const QuadratureOptions& opts = {});

}  // namespace nlsgd
