#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "errors.hpp"

namespace micromaser {
namespace detail {

// 15-point Kronrod extension of 7-point Gauss, nodes on the positive half.
inline constexpr double gk_x[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double gk_wg[4] = {0.129484966168870, 0.279705391489277,
                                    0.381830050505119, 0.417959183673469};

template <class F>
std::pair<double, double> gk15(F &&f, double lo, double hi) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double kron = gk_wk[7] * fc;
  double gauss = gk_wg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * gk_x[i];
    const double fsum = f(c - dx) + f(c + dx);
    kron += gk_wk[i] * fsum;
    if (i % 2 == 1) gauss += gk_wg[i / 2] * fsum;
  }
  kron *= h;
  gauss *= h;
  double err = std::abs(kron - gauss);
  if (!std::isfinite(kron))
    throw quadrature_error("non-finite integrand on [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]");
  return {kron, err};
}

// eps halves per subdivision; the depth-cap acceptance compares against
// eps_global so a log-integrable singularity that has already been bisected
// to a vanishing subinterval is accepted rather than rejected against a
// tolerance it can never meet.
template <class F>
double adapt(F &&f, double lo, double hi, double eps, double eps_global,
             int depth, int max_depth) {
  auto [val, err] = gk15(f, lo, hi);
  if (err <= eps || err <= 1e-15 * std::abs(val)) return val;
  if (depth >= max_depth) {
    if (err > 64.0 * eps_global)
      throw quadrature_error("depth cap hit with error " +
                             std::to_string(err) + " on [" +
                             std::to_string(lo) + ", " + std::to_string(hi) +
                             "]");
    return val;
  }
  const double mid = 0.5 * (lo + hi);
  return adapt(f, lo, mid, 0.5 * eps, eps_global, depth + 1, max_depth) +
         adapt(f, mid, hi, 0.5 * eps, eps_global, depth + 1, max_depth);
}

} // namespace detail

// Adaptive Gauss-Kronrod integration.  Relative tolerance applies to a
// first whole-interval estimate with an absolute floor.  Use tanh_sinh
// below when the integrand is singular at an endpoint.
template <class F>
double integrate(F &&f, double lo, double hi, double rel_tol = 1e-10,
                 double abs_tol = 1e-14, int max_depth = 48) {
  if (lo == hi) return 0.0;
  auto [est, err0] = detail::gk15(f, lo, hi);
  (void)err0;
  const double eps = std::max(abs_tol, rel_tol * std::abs(est));
  return detail::adapt(f, lo, hi, eps, eps, 0, max_depth);
}

// Double-exponential (tanh-sinh) quadrature on [lo, hi].  Nodes cluster
// exponentially at the endpoints, so log-integrable endpoint singularities
// converge at full rate; the integrand is never evaluated at lo or hi.
template <class F>
double tanh_sinh(F &&f, double lo, double hi, double rel_tol = 1e-12,
                 double abs_tol = 1e-15, int max_level = 10) {
  if (lo == hi) return 0.0;
  const double hw = 0.5 * (hi - lo);
  constexpr double half_pi = 1.5707963267948966;
  // One node pair at t = +-jh: abscissa offset from each endpoint and weight.
  auto pair_sum = [&](double t) -> double {
    const double A = half_pi * std::sinh(t);
    if (A > 350.0) return 0.0;
    const double ed = std::exp(-2.0 * A);
    const double omg = 2.0 * ed / (1.0 + ed); // 1 - tanh(A)
    const double x_hi = hi - hw * omg;
    const double x_lo = lo + hw * omg;
    const double ch = std::cosh(A);
    const double wgt = half_pi * std::cosh(t) / (ch * ch);
    if (x_hi >= hi || x_lo <= lo || wgt == 0.0) return 0.0;
    return wgt * (f(x_lo) + f(x_hi));
  };
  double h = 1.0;
  double sum = half_pi * f(0.5 * (lo + hi)); // t = 0 node
  for (int j = 1; j <= 7; ++j) {
    const double s = pair_sum(j * h);
    sum += s;
    if (s == 0.0) break;
  }
  double prev = sum * h * hw;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    const int jmax = static_cast<int>(7.0 / h);
    for (int j = 1; j <= jmax; j += 2) {
      const double s = pair_sum(j * h);
      sum += s;
      if (s == 0.0 && j * h > 3.0) break;
    }
    const double cur = sum * h * hw;
    if (!std::isfinite(cur))
      throw quadrature_error("non-finite integrand on [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "]");
    if (level >= 3 &&
        std::abs(cur - prev) <= std::max(abs_tol, rel_tol * std::abs(cur)))
      return cur;
    prev = cur;
  }
  return prev;
}

} // namespace micromaser
