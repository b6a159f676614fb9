#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "core.hpp"
#include "correlation.hpp"
#include "errors.hpp"
#include "phase.hpp"
#include "potential.hpp"

namespace micromaser::trapping {

// Pump value that freezes the m-th occupation through its k-th sine zero:
// theta_mk = k*pi / sqrt(m/N + Delta^2).
inline double theta_trap(int m, int k, double N, double Delta) {
  if (m < 0 || k < 1)
    throw invalid_parameter("theta_trap: need m >= 0 and k >= 1");
  if (m == 0 && Delta == 0.0)
    throw invalid_parameter("theta_trap: vacuum state only traps off "
                            "resonance");
  if (!(N > 0.0)) throw invalid_parameter("theta_trap: N must be > 0");
  return k * detail::pi / std::sqrt(m / N + Delta * Delta);
}

// Intensity cut by the k-th trapping zero at pump theta; negative values
// mean the zero sits below the vacuum and has no effect.
inline double x_cutoff(int k, double theta, double Delta) {
  if (k < 1) throw invalid_parameter("x_cutoff: k must be >= 1");
  if (!(theta > 0.0)) throw invalid_parameter("x_cutoff: theta must be > 0");
  const double r = k * detail::pi / theta;
  return r * r - Delta * Delta;
}

// Smallest pump value with a trapping state inside x <= 1.
inline double theta_trap_min(double Delta) {
  return detail::pi / std::sqrt(1.0 + Delta * Delta);
}

struct TrapState {
  int m = 0;
  int k = 0;
  double theta = 0.0;
  double x_tr = 0.0;
};

// All trapping pump values inside [theta_lo, theta_hi] with occupation
// m <= m_max, sorted by theta.
inline std::vector<TrapState> trap_states_in(double theta_lo, double theta_hi,
                                             double N, double Delta,
                                             int m_max) {
  std::vector<TrapState> out;
  const int k_hi =
      static_cast<int>(std::ceil(theta_hi * std::sqrt(1.0 / N + Delta * Delta) /
                                 detail::pi)) +
      1;
  for (int k = 1; k <= k_hi; ++k) {
    for (int m = Delta != 0.0 ? 0 : 1; m <= m_max; ++m) {
      const double th = theta_trap(m, k, N, Delta);
      if (th >= theta_lo && th <= theta_hi) out.push_back({m, k, th, m / N});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TrapState &l, const TrapState &r) {
              return l.theta < r.theta;
            });
  return out;
}

// Intensity spread of the stationary field.
inline double std_x(const MaserParams &p) {
  return moments(stationary_distribution(p), p.N).x_std;
}

// Dip of the order parameter below the equilibrium branch.
struct Dip {
  double theta = 0.0;         // refined location
  double theta_grid = 0.0;    // grid point where it was detected
  double x_mean = 0.0;
  double x_ref = 0.0;         // equilibrium-branch intensity
  double depth = 0.0;         // max(0, x_ref - x_mean)
  int near_m = 0;             // closest trapping state
  int near_k = 0;
  double near_dist = 0.0;
};

namespace detail2 {

// Equilibrium branch intensity: x of the lowest-V0 minimum, or 0 in the
// thermal phase.
inline double equilibrium_x(const MaserParams &p) {
  const auto saddles = potential::enumerate_saddles(p);
  double best_v0 = 0.0;
  double best_x = 0.0;
  for (const auto &s : saddles)
    if (s.kind == potential::SaddleKind::minimum && s.v0 < best_v0) {
      best_v0 = s.v0;
      best_x = s.x;
    }
  return best_x;
}

} // namespace detail2

// Scan <x>(theta) on a uniform grid and report local minima that fall more
// than 1e-4 below the equilibrium branch.  The dip location is refined by a
// parabola through the five surrounding grid points; exact trapping pump
// values hit w = 0, so the reference is evaluated a hair off the grid point
// when needed.
inline std::vector<Dip> dip_scan(const MaserParams &base, double theta_lo,
                                 double theta_hi, double step = 5e-3) {
  if (!(step > 0.0) || theta_hi <= theta_lo)
    throw invalid_parameter("dip_scan: bad theta window");
  if (base.n_b > 0.0)
    throw invalid_parameter(
        "dip_scan: thermal photons wash out trapping, set n_b = 0");
  const std::size_t n =
      static_cast<std::size_t>(std::floor((theta_hi - theta_lo) / step)) + 1;
  std::vector<double> th(n), xm(n), xr(n);
  for (std::size_t i = 0; i < n; ++i) {
    th[i] = theta_lo + step * static_cast<double>(i);
    MaserParams p = base;
    p.theta = th[i];
    xm[i] = moments(stationary_distribution(p), p.N).x_mean;
    try {
      xr[i] = detail2::equilibrium_x(p);
    } catch (const maser_error &) {
      p.theta = th[i] + 1e-9;
      xr[i] = detail2::equilibrium_x(p);
    }
  }

  const int m_max = static_cast<int>(std::ceil(
      3.0 * base.N * (1.0 + base.Delta * base.Delta)));
  std::vector<Dip> dips;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(xm[i] < xm[i - 1] && xm[i] < xm[i + 1])) continue;
    if (!(xr[i] > 0.0) || xr[i] - xm[i] <= 1e-4) continue;
    Dip d;
    d.theta_grid = th[i];
    d.x_mean = xm[i];
    d.x_ref = xr[i];
    d.depth = std::max(0.0, xr[i] - xm[i]);
    // least-squares parabola through up to five surrounding points
    std::size_t lo = i >= 2 ? i - 2 : i - 1;
    std::size_t hi = i + 2 < n ? i + 2 : i + 1;
    double num = 0.0, den = 0.0;
    {
      // least-squares parabola vertex on [lo, hi]
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
      for (std::size_t j = lo; j <= hi; ++j) {
        const double t = th[j] - th[i];
        const double t2 = t * t;
        s0 += 1.0;
        s1 += t;
        s2 += t2;
        s3 += t2 * t;
        s4 += t2 * t2;
        b0 += xm[j];
        b1 += xm[j] * t;
        b2 += xm[j] * t2;
      }
      // normal equations for c0 + c1 t + c2 t^2
      const double d00 = s0, d01 = s1, d02 = s2, d11 = s2, d12 = s3,
                   d22 = s4;
      const double det = d00 * (d11 * d22 - d12 * d12) -
                         d01 * (d01 * d22 - d12 * d02) +
                         d02 * (d01 * d12 - d11 * d02);
      const double c1 = (b0 * (d12 * d02 - d01 * d22) +
                         b1 * (d00 * d22 - d02 * d02) +
                         b2 * (d01 * d02 - d00 * d12)) /
                        det;
      const double c2 = (b0 * (d01 * d12 - d11 * d02) +
                         b1 * (d01 * d02 - d00 * d12) +
                         b2 * (d00 * d11 - d01 * d01)) /
                        det;
      num = -c1;
      den = 2.0 * c2;
    }
    d.theta = den > 0.0 ? th[i] + num / den : th[i];
    if (d.theta < th[i] - step || d.theta > th[i] + step) d.theta = th[i];

    d.near_dist = detail::inf;
    const auto traps =
        trap_states_in(d.theta - 1.0, d.theta + 1.0, base.N, base.Delta, m_max);
    for (const auto &t : traps) {
      const double dist = std::abs(t.theta - d.theta);
      if (dist < d.near_dist) {
        d.near_dist = dist;
        d.near_m = t.m;
        d.near_k = t.k;
      }
    }
    dips.push_back(d);
  }
  return dips;
}

// Local maxima of the exact correlation length on a theta grid; trapping
// states show up as a peak comb that gets denser with N.
struct CorrPeak {
  double theta = 0.0;
  double gamma_xi = 0.0;
};

inline std::vector<CorrPeak> correlation_peaks(const MaserParams &base,
                                               double theta_lo,
                                               double theta_hi, double step) {
  if (!(step > 0.0) || theta_hi <= theta_lo)
    throw invalid_parameter("correlation_peaks: bad theta window");
  const std::size_t n =
      static_cast<std::size_t>(std::floor((theta_hi - theta_lo) / step)) + 1;
  std::vector<double> gx(n);
  for (std::size_t i = 0; i < n; ++i) {
    MaserParams p = base;
    p.theta = theta_lo + step * static_cast<double>(i);
    gx[i] = correlation::xi_exact(p).gamma_xi;
  }
  std::vector<CorrPeak> peaks;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (gx[i] > gx[i - 1] && gx[i] > gx[i + 1])
      peaks.push_back({theta_lo + step * static_cast<double>(i), gx[i]});
  return peaks;
}

} // namespace micromaser::trapping
