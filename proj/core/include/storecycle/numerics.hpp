#pragma once

#include <functional>
#include <span>
#include <vector>

namespace storecycle::numerics {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule. Rules are computed once per n and cached.
const GaussLegendreRule& gauss_legendre(int n);

/// Fixed n-point Gauss-Legendre approximation of the integral of f over [a, b].
double integrate_gauss(const std::function<double(double)>& f, double a, double b, int n);

/// Composite Gauss-Legendre with `nodes` points per panel. The panel count is
/// doubled until two successive estimates agree to `rel_tol`; throws
/// QuadratureError once `max_panels` is exceeded.
double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           int nodes, double rel_tol, int max_panels = 4096);

struct ScalarOptimum {
  double x;
  double value;
};

/// Golden-section search for a maximum of a unimodal f on [lo, hi].
ScalarOptimum golden_section_maximize(const std::function<double(double)>& f, double lo,
                                      double hi, double x_tol, int max_iter = 500);

/// Bisection for a sign change of f on [lo, hi]; f(lo) and f(hi) must differ in sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double x_tol,
              int max_iter = 400);

}  // namespace storecycle::numerics
