#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "params.hpp"

namespace micromaser {

namespace detail {

inline constexpr double pi = 3.141592653589793238462643383279502884;
// fl(pi) and the next correction word; pi = pi_hi + pi_lo to ~1e-33.
inline constexpr double pi_hi = 3.141592653589793;
inline constexpr double pi_lo = 1.2246467991473532e-16;
inline constexpr double inf = std::numeric_limits<double>::infinity();

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// u reduced against the two-word pi: r = u - k*pi with k = round(u/pi).
// Arguments a few ulps from a multiple of pi snap r to exactly 0 so that
// trapping cutoffs produce bitwise-zero emission probabilities.
inline double reduce_pi(double u) {
  const double k = std::nearbyint(u / pi_hi);
  const double kpi = k * pi_hi;
  const double perr = std::fma(k, pi_hi, -kpi);
  double r = ((u - kpi) - perr) - k * pi_lo;
  const double snap =
      8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(u));
  if (std::abs(r) < snap) r = 0.0;
  return r;
}

// sin^2(u) with the reduction above; exact 0.0 at snapped multiples of pi.
inline double sin2(double u) {
  const double r = reduce_pi(u);
  if (r == 0.0) return 0.0;
  const double s = std::sin(r);
  return s * s;
}

// sin^2(u) without the snap, floored away from zero; for integrands whose
// logarithm must stay finite arbitrarily close to a multiple of pi.
inline double sin2_raw(double u) {
  const double k = std::nearbyint(u / pi_hi);
  const double kpi = k * pi_hi;
  const double perr = std::fma(k, pi_hi, -kpi);
  const double r = ((u - kpi) - perr) - k * pi_lo;
  const double s = std::sin(r);
  return std::max(s * s, 1e-300);
}

// sin(u)*cos(u) with the same reduction (sign of sin flips per half turn,
// the product does not care about the shared sign).
inline double sincos(double u) {
  const double r = reduce_pi(u);
  if (r == 0.0) return 0.0;
  return std::sin(r) * std::cos(r);
}

inline double logaddexp(double x, double y) {
  if (x == -inf) return y;
  if (y == -inf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

inline double logsumexp(const std::vector<double> &v) {
  double m = -inf;
  for (double x : v) m = std::max(m, x);
  if (m == -inf) return -inf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

} // namespace detail

// Single-pass emission probability q(x) = x/(x+Delta^2) * sin^2(theta*sqrt(x+Delta^2)).
// Series for small arguments keeps full relative accuracy near x = 0.
inline double q(double x, double theta, double Delta) {
  if (x < 0.0)
    throw invalid_parameter("q: x must be >= 0, got " + std::to_string(x));
  if (x == 0.0) return 0.0;
  const double d2 = Delta * Delta;
  const double s = x + d2;
  const double u = theta * std::sqrt(s);
  if (u < 1e-4) {
    const double u2 = u * u;
    return x * theta * theta * (1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 45.0);
  }
  return x / s * detail::sin2(u);
}

// Effective squared pump parameter at zero field:
// theta_eff^2 = theta^2 * sin^2(theta*Delta) / (theta*Delta)^2.
inline double theta_eff2(double theta, double Delta) {
  const double u = std::abs(theta * Delta);
  if (u < 1e-4) {
    return theta * theta * (1.0 - u * u / 3.0);
  }
  return detail::sin2(u) / (Delta * Delta);
}

// Ratio w(x) entering the continuum potential,
// w = (n_b*x + a*q) / ((1+n_b)*x + b*q), with the analytic x -> 0 limit
// (n_b + a*theta_eff^2) / (1 + n_b + b*theta_eff^2).
// At an exact trapping zero with n_b = 0 this returns 0; the potential
// integrand guards against taking log of it.
inline double w(double x, const MaserParams &p) {
  if (x < 0.0)
    throw invalid_parameter("w: x must be >= 0");
  if (x == 0.0) {
    const double t2 = theta_eff2(p.theta, p.Delta);
    return (p.n_b + p.a * t2) / (1.0 + p.n_b + p.b() * t2);
  }
  const double qx = q(x, p.theta, p.Delta);
  return (p.n_b * x + p.a * qx) / ((1.0 + p.n_b) * x + p.b() * qx);
}

// Stationary photon-number distribution and its bookkeeping.
//   log_weights      log p(n) up to a common constant; -inf marks exact zeros
//   probs            normalized probabilities
//   n_max            last retained occupation number
//   tail_mass_bound  geometric bound on the discarded mass
struct PhotonDistribution {
  std::vector<double> log_weights;
  std::vector<double> probs;
  std::size_t n_max = 0;
  double tail_mass_bound = 0.0;
};

namespace detail {

inline std::size_t n_max_rule(const MaserParams &p) {
  const double drift = p.N * (2.0 * p.a - 1.0 + p.Delta * p.Delta);
  const double spread = 12.0 * std::sqrt(p.N * p.n_b + p.N) + 40.0;
  const double n0 = std::max(64.0, drift + spread);
  return static_cast<std::size_t>(std::ceil(n0));
}

} // namespace detail

// Detailed-balance product for the stationary distribution:
// p(n)/p(n-1) = (n_b*n + N*a*q_n) / ((1+n_b)*n + N*b*q_n), q_n = q(n/N).
// Accumulated in log space; a zero ratio with n_b = 0 cuts the support
// (all later weights are exactly -inf).  Truncation grows until the last
// retained weight is 36 nats under the peak and a geometric bound on the
// remaining mass is below tol.
inline PhotonDistribution stationary_distribution(const MaserParams &p,
                                                  double tol = 1e-14) {
  p.validate();
  std::size_t n_cap = detail::n_max_rule(p);
  const std::size_t hard_cap = std::size_t{1} << 21;

  PhotonDistribution d;
  for (;;) {
    d.log_weights.assign(n_cap + 1, -detail::inf);
    d.log_weights[0] = 0.0;
    double lw = 0.0;
    bool cut = false;
    std::size_t last = 0;
    for (std::size_t n = 1; n <= n_cap; ++n) {
      const double nn = static_cast<double>(n);
      const double qn = q(nn / p.N, p.theta, p.Delta);
      const double num = p.n_b * nn + p.N * p.a * qn;
      const double den = (1.0 + p.n_b) * nn + p.N * p.b() * qn;
      if (num <= 0.0) {
        cut = true; // exact zero ratio: support ends at n-1
        break;
      }
      lw += std::log(num / den);
      d.log_weights[n] = lw;
      last = n;
    }
    double peak = -detail::inf;
    for (std::size_t n = 0; n <= last; ++n)
      peak = std::max(peak, d.log_weights[n]);

    bool converged = cut;
    double tail_ratio = 0.0;
    if (!cut) {
      const double nn = static_cast<double>(last + 1);
      const double qn = q(nn / p.N, p.theta, p.Delta);
      tail_ratio = (p.n_b * nn + p.N * p.a * qn) / ((1.0 + p.n_b) * nn);
      converged = (peak - d.log_weights[last] > 36.0) && (tail_ratio < 1.0);
    }
    if (converged) {
      d.log_weights.resize(last + 1);
      d.n_max = last;
      double logz = detail::logsumexp(d.log_weights);
      d.probs.resize(last + 1);
      for (std::size_t n = 0; n <= last; ++n)
        d.probs[n] = std::exp(d.log_weights[n] - logz);
      d.tail_mass_bound =
          cut ? 0.0
              : std::exp(d.log_weights[last] - logz) * tail_ratio /
                    (1.0 - tail_ratio);
      if (!cut && d.tail_mass_bound > tol && n_cap < hard_cap) {
        n_cap *= 2;
        continue;
      }
      if (!cut && d.tail_mass_bound > tol)
        throw truncation_error("stationary_distribution: tail bound " +
                               std::to_string(d.tail_mass_bound) +
                               " above tolerance at hard cap");
      return d;
    }
    if (n_cap >= hard_cap)
      throw truncation_error(
          "stationary_distribution: no convergence below hard cap; "
          "distribution may be divergent");
    n_cap *= 2;
  }
}

// First two moments of n and of the scaled variable x = n/N, plus the
// cumulative sums P_n = sum_{m<n} p(m).  q_mean is filled only by the
// overload that knows theta and Delta.
struct Moments {
  double n_mean = 0.0;
  double n_var = 0.0;
  double x_mean = 0.0;
  double x_std = 0.0;
  double q_mean = 0.0;
  std::vector<double> cumulative;
};

inline Moments moments(const PhotonDistribution &d, double N) {
  if (!(N > 0.0)) throw invalid_parameter("moments: N must be > 0");
  double m1 = 0.0, m2 = 0.0;
  Moments m;
  m.cumulative.resize(d.probs.size() + 1, 0.0);
  for (std::size_t n = 0; n < d.probs.size(); ++n) {
    const double nn = static_cast<double>(n);
    m1 += nn * d.probs[n];
    m2 += nn * nn * d.probs[n];
    m.cumulative[n + 1] = m.cumulative[n] + d.probs[n];
  }
  m.n_mean = m1;
  m.n_var = std::max(0.0, m2 - m1 * m1);
  m.x_mean = m1 / N;
  m.x_std = std::sqrt(m.n_var) / N;
  return m;
}

inline Moments moments(const PhotonDistribution &d, const MaserParams &p) {
  Moments m = moments(d, p.N);
  for (std::size_t n = 0; n < d.probs.size(); ++n)
    m.q_mean += q(static_cast<double>(n) / p.N, p.theta, p.Delta) * d.probs[n];
  return m;
}

// Closed-form geometric distribution for the zero-field (thermal) phase:
// ratio r = (n_b + a*theta_eff^2) / (1 + n_b + b*theta_eff^2) per step.
// Throws divergence_error when theta_eff^2*(2a-1) >= 1 (no stationary
// geometric state).  At a/b = n_b/(1+n_b) the pump cancels exactly and the
// state is Planck at temperature n_b for every theta.
inline PhotonDistribution thermal_distribution(const MaserParams &p,
                                               double tol = 1e-14) {
  p.validate();
  const double t2 = theta_eff2(p.theta, p.Delta);
  if (t2 * (2.0 * p.a - 1.0) >= 1.0)
    throw divergence_error(
        "thermal_distribution: gain exceeds loss, geometric state diverges");
  const double r = (p.n_b + p.a * t2) / (1.0 + p.n_b + p.b() * t2);
  PhotonDistribution d;
  if (r == 0.0) {
    d.log_weights = {0.0};
    d.probs = {1.0};
    d.n_max = 0;
    d.tail_mass_bound = 0.0;
    return d;
  }
  const double logr = std::log(r);
  const std::size_t n_cap =
      static_cast<std::size_t>(std::ceil(std::max(64.0, std::log(tol) / logr)));
  d.log_weights.resize(n_cap + 1);
  d.probs.resize(n_cap + 1);
  for (std::size_t n = 0; n <= n_cap; ++n) {
    d.log_weights[n] = logr * static_cast<double>(n);
    d.probs[n] = (1.0 - r) * std::exp(d.log_weights[n]);
  }
  d.n_max = n_cap;
  d.tail_mass_bound = std::exp(logr * static_cast<double>(n_cap + 1));
  return d;
}

} // namespace micromaser
