#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "roots.hpp"

namespace micromaser::potential {

enum class SaddleKind { minimum, maximum };

// Extremum of the effective potential V0(x) at fixed theta.  phi is the
// branch parameter, x = C*sin^2(phi) - Delta^2 the field intensity,
// curvature = d^2 V0/dx^2 at the point.
struct SaddlePoint {
  double phi = 0.0;
  double x = 0.0;
  double theta = 0.0;
  int branch = 0;
  SaddleKind kind = SaddleKind::minimum;
  double v0 = 0.0;
  double curvature = 0.0;
};

// Pump inversion C = 2a - 1; maser branches exist only for C > 0.
inline double inversion(double a) { return 2.0 * a - 1.0; }

// Branch entry angle phi0 = arcsin(|Delta|/sqrt(C)).
inline double phi0(double a, double Delta) {
  const double C = inversion(a);
  if (C <= 0.0)
    throw no_solution("phi0: no maser branches for a <= 1/2");
  const double z = std::abs(Delta) / std::sqrt(C);
  if (z > 1.0)
    throw no_solution("phi0: |Delta| exceeds sqrt(2a-1), branches are gone");
  return std::asin(z);
}

// Branch k occupies phi in [phi0 + k*pi, (k+1)*pi - phi0].
inline std::pair<double, double> branch_domain(int k, double a, double Delta) {
  if (k < 0) throw invalid_parameter("branch index must be >= 0");
  const double p0 = phi0(a, Delta);
  return {p0 + k * detail::pi, (k + 1) * detail::pi - p0};
}

inline double x_of_phi(double phi, double a, double Delta) {
  const double s = std::sin(phi);
  return inversion(a) * s * s - Delta * Delta;
}

// Pump parameter pinned to the saddle condition q(x) = x/C.
inline double theta_of_phi(double phi, double a) {
  const double C = inversion(a);
  if (C <= 0.0)
    throw no_solution("theta_of_phi: no maser branches for a <= 1/2");
  const double s = std::abs(std::sin(phi));
  if (s == 0.0) return detail::inf;
  return phi / (std::sqrt(C) * s);
}

// Continuum potential from its defining integral, V0(x) = -int_0^x ln w.
// Trapping zeros of w (n_b = 0) are log-integrable; the adaptive rule
// splits around them and only gives up if a node lands on w = 0 exactly.
inline double v0_of_x(double x, const MaserParams &p) {
  if (x < 0.0)
    throw invalid_parameter("v0_of_x: x must be >= 0");
  if (x == 0.0) return 0.0;
  // Raw sin^2 (no snapping, floored away from 0) keeps ln w finite at every
  // quadrature node; the snapped zeros exist for the discrete ladder, not
  // for this integrand.
  auto f = [&p](double xi) {
    const double d2 = p.Delta * p.Delta;
    const double s = xi + d2;
    const double u = p.theta * std::sqrt(s);
    const double qx = u < 1e-4
                          ? xi * p.theta * p.theta *
                                (1.0 - u * u / 3.0 + 2.0 * u * u * u * u / 45.0)
                          : xi / s * detail::sin2_raw(u);
    return std::log((p.n_b * xi + p.a * qx) /
                    ((1.0 + p.n_b) * xi + p.b() * qx));
  };
  // At n_b = 0 the gain w vanishes at the trapping cutoffs, so ln w has
  // log-integrable interior singularities there.  Splitting at the (exactly
  // known) cutoffs turns them into interval endpoints, which the quadrature
  // rule never evaluates and the subdivision converges toward.
  std::vector<double> cuts{0.0};
  if (p.n_b == 0.0 && p.theta > 0.0) {
    for (int k = 1;; ++k) {
      const double u = double(k) * detail::pi / p.theta;
      const double xk = u * u - p.Delta * p.Delta;
      if (xk >= x) break;
      if (xk > 0.0) cuts.push_back(xk);
    }
  }
  cuts.push_back(x);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    acc -= tanh_sinh(f, cuts[i], cuts[i + 1]);
  return acc;
}

namespace detail2 {

// sin(2*chi) - 2*sin^2(chi)/chi, with its small-argument series.
inline double branch_kernel(double chi) {
  if (chi <= 0.0) return 0.0;
  if (chi < 0.05) {
    const double c2 = chi * chi;
    return chi * c2 * (-2.0 / 3.0 + c2 * (8.0 / 45.0 - c2 * 2.0 / 105.0));
  }
  const double s = std::sin(chi);
  return std::sin(2.0 * chi) - 2.0 * s * s / chi;
}

// Integrate an oscillatory branch integrand piecewise, split at multiples
// of pi.  One lobe per piece keeps the adaptive tree shallow even when the
// lobes nearly cancel, and the sharp dips of P at multiples of pi land on
// piece endpoints.
template <class F>
double lobewise(F &&f, double lo, double hi) {
  if (hi <= lo) return 0.0;
  double acc = 0.0;
  double a0 = lo;
  for (double m = std::ceil(lo / micromaser::detail::pi);; m += 1.0) {
    const double cut = m * micromaser::detail::pi;
    if (cut >= hi - 1e-12) break;
    if (cut > a0 + 1e-12) {
      acc += integrate(f, a0, cut, 1e-10, 1e-12, 30);
      a0 = cut;
    }
  }
  acc += integrate(f, a0, hi, 1e-10, 1e-12, 30);
  return acc;
}

} // namespace detail2

// V0 at the branch point phi on branch k, with theta = theta_of_phi(phi).
// Uses the single-integral branch form
//   V0 = (a + n_b*C) * int_{theta|Delta|}^{phi} chi^4 K(chi)/(P*Q) dchi
//        + Delta^2 * ln w(0)
// whose integrand is smooth for n_b > 0.  For n_b = 0 and k >= 1 the
// integrand has non-integrable interior poles at multiples of pi, so the
// x-space integral is used instead.
inline double v0_on_branch(double phi, int k, const MaserParams &p) {
  p.validate();
  const auto [lo_phi, hi_phi] = branch_domain(k, p.a, p.Delta);
  if (phi < lo_phi - 1e-6 || phi > hi_phi + 1e-6)
    throw invalid_parameter("v0_on_branch: phi outside branch domain");
  const double C = inversion(p.a);
  const double th = theta_of_phi(phi, p.a);
  const double x = std::max(0.0, x_of_phi(phi, p.a, p.Delta));

  MaserParams pt = p;
  pt.theta = th;

  const double chi_lo = th * std::abs(p.Delta);
  bool x_form = (k >= 1 && p.n_b == 0.0);
  // vacuum-trapped boundary: w(0) = 0 makes the split form singular
  if (p.n_b == 0.0 && chi_lo > 1.0 &&
      micromaser::detail::reduce_pi(chi_lo) == 0.0)
    x_form = true;
  if (x_form) return v0_of_x(x, pt);

  const double a = p.a, b = p.b(), n_b = p.n_b, th2 = th * th;
  auto f = [=](double chi) {
    if (chi <= 0.0) return 0.0;
    const double s = std::sin(chi);
    const double s2 = s * s;
    const double P = chi * chi * n_b + a * th2 * s2;
    const double Q = chi * chi * (1.0 + n_b) + b * th2 * s2;
    const double c2 = chi * chi;
    return c2 * c2 * detail2::branch_kernel(chi) / (P * Q);
  };
  try {
    const double I = detail2::lobewise(f, chi_lo, phi);
    double boundary = 0.0;
    if (p.Delta != 0.0)
      boundary = p.Delta * p.Delta * std::log(w(0.0, pt));
    return (a + n_b * C) * I + boundary;
  } catch (const quadrature_error &) {
    return v0_of_x(x, pt);
  }
}

// dV0/dtheta at the saddle (envelope form: x held at the extremum),
//   dV0/dtheta = -(2/theta) (a + n_b*C) int chi^4 sin(2chi)/(P*Q) dchi.
// Restricted to minima for k >= 1.  For n_b = 0, k >= 1 falls back to a
// finite difference of the x-space potential along the branch.
inline double dv0_dtheta(double phi, int k, const MaserParams &p) {
  p.validate();
  const auto [lo_phi, hi_phi] = branch_domain(k, p.a, p.Delta);
  if (phi < lo_phi - 1e-6 || phi > hi_phi + 1e-6)
    throw invalid_parameter("dv0_dtheta: phi outside branch domain");
  const double disc = 1.0 - phi * std::cos(phi) / std::sin(phi);
  if (k >= 1 && disc <= 0.0)
    throw invalid_parameter(
        "dv0_dtheta: phi lies on the maximum sub-branch");
  const double C = inversion(p.a);
  const double th = theta_of_phi(phi, p.a);
  const double chi_lo = th * std::abs(p.Delta);

  bool x_form = (k >= 1 && p.n_b == 0.0);
  if (p.n_b == 0.0 && chi_lo > 1.0 &&
      micromaser::detail::reduce_pi(chi_lo) == 0.0)
    x_form = true;
  if (x_form) {
    const double h = 1e-5;
    const double vp = v0_on_branch(phi + h, k, p);
    const double vm = v0_on_branch(phi - h, k, p);
    const double dth_dphi = th * (1.0 / phi - std::cos(phi) / std::sin(phi));
    return (vp - vm) / (2.0 * h) / dth_dphi;
  }

  const double a = p.a, b = p.b(), n_b = p.n_b, th2 = th * th;
  auto f = [=](double chi) {
    if (chi <= 0.0) return 0.0;
    const double s = std::sin(chi);
    const double s2 = s * s;
    const double P = chi * chi * n_b + a * th2 * s2;
    const double Q = chi * chi * (1.0 + n_b) + b * th2 * s2;
    const double c2 = chi * chi;
    return c2 * c2 * std::sin(2.0 * chi) / (P * Q);
  };
  const double J = detail2::lobewise(f, chi_lo, phi);
  return -(2.0 / th) * (a + n_b * C) * J;
}

// Saddle curvature d^2 V0/dx^2 in branch coordinates:
// (1 - phi*cot(phi)) / (sin^2(phi) * (a + n_b*C)).
inline double v0_second(double phi, const MaserParams &p) {
  const double C = inversion(p.a);
  const double s = std::sin(phi);
  const double disc = 1.0 - phi * std::cos(phi) / s;
  return disc / (s * s * (p.a + p.n_b * C));
}

// Same curvature from the x-space form (valid at a saddle only),
// (1 - C*q'(x)) * C / (x * (a + n_b*C)).
inline double v0_second_x(double x, const MaserParams &p) {
  if (x <= 0.0)
    throw invalid_parameter("v0_second_x: x must be > 0");
  const double C = inversion(p.a);
  const double d2 = p.Delta * p.Delta;
  const double s = x + d2;
  const double u = p.theta * std::sqrt(s);
  const double s2u = micromaser::detail::sin2(u);
  const double scu = micromaser::detail::sincos(u);
  const double qp = d2 * s2u / (s * s) + x * scu * p.theta / (s * std::sqrt(s));
  return (1.0 - C * qp) * C / (x * (p.a + p.n_b * C));
}

// Full saddle data at a given branch parameter.  theta is pinned by the
// extremum condition q(x) = x/C, so the returned point is an extremum of
// V0 at that pump strength; p.theta is ignored.
inline SaddlePoint branch_point(double phi, const MaserParams &p) {
  const double p0 = phi0(p.a, p.Delta);
  const int k = static_cast<int>(std::floor(phi / detail::pi));
  if (k < 0 || phi < p0 + k * detail::pi - 1e-12 ||
      phi > (k + 1) * detail::pi - p0 + 1e-12)
    throw invalid_parameter("branch_point: phi outside every branch interval");
  SaddlePoint s;
  s.phi = phi;
  s.x = x_of_phi(phi, p.a, p.Delta);
  s.theta = theta_of_phi(phi, p.a);
  s.branch = k;
  const double disc = 1.0 - phi * std::cos(phi) / std::sin(phi);
  s.kind = disc > 0.0 ? SaddleKind::minimum : SaddleKind::maximum;
  s.v0 = v0_on_branch(phi, k, p);
  s.curvature = v0_second(phi, p);
  return s;
}

// All extrema of V0 at p.theta across branches 0..floor(theta*sqrt(C)/pi)+1,
// sorted by x.  Empty when no maser branch exists (a <= 1/2 or |Delta| too
// large).
inline std::vector<SaddlePoint> enumerate_saddles(const MaserParams &p) {
  p.validate();
  std::vector<SaddlePoint> out;
  const double C = inversion(p.a);
  if (C <= 0.0) return out;
  const double rootC = std::sqrt(C);
  if (std::abs(p.Delta) >= rootC) return out;

  const int k_max =
      static_cast<int>(std::floor(p.theta * rootC / detail::pi)) + 1;
  for (int k = 0; k <= k_max; ++k) {
    auto [lo, hi] = branch_domain(k, p.a, p.Delta);
    lo += 1e-9;
    hi -= 1e-9;
    if (lo >= hi) continue;
    auto g = [&](double phi) { return theta_of_phi(phi, p.a) - p.theta; };
    for (auto [blo, bhi] : detail::scan_brackets(g, lo, hi, 64)) {
      const double phi = detail::bisect(g, blo, bhi, 1e-13);
      const double x = x_of_phi(phi, p.a, p.Delta);
      if (x <= 0.0) continue;
      SaddlePoint s;
      s.phi = phi;
      s.x = x;
      s.theta = p.theta;
      s.branch = k;
      const double disc = 1.0 - phi * std::cos(phi) / std::sin(phi);
      s.kind = disc > 0.0 ? SaddleKind::minimum : SaddleKind::maximum;
      s.v0 = v0_on_branch(phi, k, p);
      s.curvature = v0_second(phi, p);
      out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SaddlePoint &l, const SaddlePoint &r) { return l.x < r.x; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const SaddlePoint &l, const SaddlePoint &r) {
                          return std::abs(l.x - r.x) < 1e-10;
                        }),
            out.end());
  return out;
}

// Large-N Gaussian approximation of the stationary state: one component
// per potential minimum, weight ~ exp(-N*V0)/sqrt(V0''), variance
// 1/(N*V0'') in x.
struct GaussianMixture {
  struct Component {
    double x = 0.0;
    double weight = 0.0;
    double var_x = 0.0;
  };
  std::vector<Component> components;

  double mean() const {
    double m = 0.0;
    for (const auto &c : components) m += c.weight * c.x;
    return m;
  }
  double density(double x) const {
    double d = 0.0;
    for (const auto &c : components) {
      const double z = (x - c.x) * (x - c.x) / (2.0 * c.var_x);
      d += c.weight * std::exp(-z) /
           std::sqrt(2.0 * detail::pi * c.var_x);
    }
    return d;
  }
};

inline GaussianMixture gaussian_mixture(const MaserParams &p) {
  const auto saddles = enumerate_saddles(p);
  std::vector<const SaddlePoint *> minima;
  for (const auto &s : saddles)
    if (s.kind == SaddleKind::minimum) minima.push_back(&s);
  if (minima.empty())
    throw no_solution("gaussian_mixture: no potential minima (thermal phase)");

  std::vector<double> lw(minima.size());
  for (std::size_t i = 0; i < minima.size(); ++i)
    lw[i] = -p.N * minima[i]->v0 - 0.5 * std::log(minima[i]->curvature);
  const double logz = detail::logsumexp(lw);

  GaussianMixture m;
  for (std::size_t i = 0; i < minima.size(); ++i) {
    const double wgt = std::exp(lw[i] - logz);
    if (wgt < 1e-300) continue;
    m.components.push_back({minima[i]->x, wgt, 1.0 / (p.N * minima[i]->curvature)});
  }
  return m;
}

} // namespace micromaser::potential
