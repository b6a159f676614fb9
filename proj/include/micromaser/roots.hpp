#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace micromaser {
namespace detail {

// Sign-change brackets of f on a uniform n-sample scan of [lo, hi].
// Exact zeros at a sample count as a degenerate bracket.
template <class F>
std::vector<std::pair<double, double>> scan_brackets(F &&f, double lo,
                                                     double hi,
                                                     std::size_t n = 64) {
  std::vector<std::pair<double, double>> out;
  double x0 = lo, f0 = f(lo);
  for (std::size_t i = 1; i <= n; ++i) {
    const double x1 = lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(n);
    const double f1 = f(x1);
    if (f0 == 0.0)
      out.emplace_back(x0, x0);
    else if (f0 * f1 < 0.0)
      out.emplace_back(x0, x1);
    x0 = x1;
    f0 = f1;
  }
  if (f0 == 0.0) out.emplace_back(x0, x0);
  return out;
}

// Bisection to |hi-lo| < xtol; assumes a sign change on entry.
template <class F>
double bisect(F &&f, double lo, double hi, double xtol = 1e-13) {
  if (lo == hi) return lo;
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw no_solution("bisect: no sign change on the given bracket");
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace detail
} // namespace micromaser
