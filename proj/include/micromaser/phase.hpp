#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "potential.hpp"
#include "roots.hpp"

namespace micromaser::phase {

// Threshold of the continuous transition: theta_0* = arcsin(|Delta|/sqrt(C))/|Delta|,
// reducing to 1/sqrt(C) at zero detuning.
inline double theta_0crit(double a, double Delta) {
  const double C = potential::inversion(a);
  if (C <= 0.0)
    throw no_solution("theta_0crit: no transition for a <= 1/2");
  const double ad = std::abs(Delta);
  if (ad >= std::sqrt(C))
    throw no_solution("theta_0crit: |Delta| >= sqrt(2a-1), no transition");
  if (ad < 1e-6)
    return (1.0 + Delta * Delta / (6.0 * C)) / std::sqrt(C);
  return std::asin(ad / std::sqrt(C)) / ad;
}

// Fold angle phi_k: root of sin(phi) = phi*cos(phi) in (k*pi, k*pi + pi/2).
inline double fold_angle(int k) {
  if (k < 1) throw invalid_parameter("fold_angle: k must be >= 1");
  auto g = [](double phi) { return std::sin(phi) - phi * std::cos(phi); };
  const double lo = k * detail::pi + 1e-9;
  const double hi = k * detail::pi + 0.5 * detail::pi - 1e-9;
  return detail::bisect(g, lo, hi, 1e-13);
}

// Pump value where the branch-k minimum first appears (fold of theta(phi)).
inline double theta_fold(int k, double a, double Delta = 0.0) {
  const double phi_k = fold_angle(k);
  const auto [lo, hi] = potential::branch_domain(k, a, Delta);
  (void)hi;
  if (phi_k <= lo)
    throw no_solution("theta_fold: fold lies outside the branch domain");
  return potential::theta_of_phi(phi_k, a);
}

// The minimum of branch k at pump theta, if the branch is alive there.
// theta(phi) is monotone on the minimum sub-branch, so a scan + bisection
// finds the unique solution.
inline std::optional<potential::SaddlePoint>
branch_minimum(int k, const MaserParams &p) {
  const double C = potential::inversion(p.a);
  if (C <= 0.0 || std::abs(p.Delta) >= std::sqrt(C)) return std::nullopt;
  auto [lo, hi] = potential::branch_domain(k, p.a, p.Delta);
  if (k >= 1) lo = std::max(lo, fold_angle(k));
  lo += 1e-9;
  hi -= 1e-9;
  if (lo >= hi) return std::nullopt;
  auto g = [&](double phi) { return potential::theta_of_phi(phi, p.a) - p.theta; };
  const auto brackets = detail::scan_brackets(g, lo, hi, 64);
  if (brackets.empty()) return std::nullopt;
  const double phi = detail::bisect(g, brackets.front().first,
                                    brackets.front().second, 1e-13);
  const double x = potential::x_of_phi(phi, p.a, p.Delta);
  if (x <= 0.0) return std::nullopt;
  potential::SaddlePoint s;
  s.phi = phi;
  s.x = x;
  s.theta = p.theta;
  s.branch = k;
  s.kind = potential::SaddleKind::minimum;
  s.v0 = potential::v0_on_branch(phi, k, p);
  s.curvature = potential::v0_second(phi, p);
  return s;
}

// Pump value where branch k is reabsorbed into the vacuum, closed form
// ((k+1)*pi - phi0)/|Delta|.  Unreachable at zero detuning.
inline double theta_maser_thermal(int k, double a, double Delta) {
  if (Delta == 0.0)
    throw no_solution(
        "theta_maser_thermal: branch never dies at zero detuning");
  const double p0 = potential::phi0(a, Delta);
  return ((k + 1) * detail::pi - p0) / std::abs(Delta);
}

namespace detail2 {

inline double thermal_maser_scan(int k, double a, double n_b, double Delta,
                                 bool check_mask) {
  MaserParams p;
  p.a = a;
  p.n_b = n_b;
  p.Delta = Delta;
  const double lo = theta_fold(k, a, Delta) + 1e-6;
  double hi;
  if (Delta != 0.0)
    hi = theta_maser_thermal(k, a, Delta) - 1e-6;
  else
    hi = lo + 40.0;
  if (hi <= lo)
    throw no_solution("theta_thermal_maser: branch window is empty");

  auto g = [&](double th) {
    p.theta = th;
    const auto m = branch_minimum(k, p);
    if (!m) return detail::inf;
    return m->v0;
  };
  const int n = 512;
  double prev_th = lo, prev_g = g(lo);
  double root = -1.0;
  for (int i = 1; i <= n; ++i) {
    const double th = lo + (hi - lo) * i / n;
    const double cur = g(th);
    if (std::isfinite(prev_g) && std::isfinite(cur) && prev_g > 0.0 &&
        cur <= 0.0) {
      root = detail::bisect(g, prev_th, th, 1e-12);
      break;
    }
    prev_th = th;
    prev_g = cur;
  }
  if (root < 0.0)
    throw no_solution("theta_thermal_maser: V0 never crosses zero on branch " +
                      std::to_string(k));
  if (check_mask) {
    p.theta = root;
    const int k_top =
        static_cast<int>(std::floor(root * std::sqrt(2.0 * a - 1.0) /
                                    detail::pi)) +
        1;
    for (int j = 0; j <= k_top; ++j) {
      if (j == k) continue;
      const auto m = branch_minimum(j, p);
      if (m && m->v0 < -1e-10)
        throw no_solution(
            "theta_thermal_maser: crossing masked by deeper branch " +
            std::to_string(j));
    }
  }
  return root;
}

} // namespace detail2

// First pump value where the branch-k minimum reaches V0 = 0 and the
// vacuum loses global stability to it.  Throws if a different branch is
// already deeper there (the crossing is then not a thermal boundary).
// For k = 0 this is the continuous threshold itself.
inline double theta_thermal_maser(int k, double a, double n_b, double Delta) {
  if (k == 0) return theta_0crit(a, Delta);
  return detail2::thermal_maser_scan(k, a, n_b, Delta, true);
}

// First-order line between branch k and branch k+1: V0 of the two minima
// cross.  Found by bisection on the depth difference.
inline double theta_maser_maser(int k, double a, double n_b, double Delta) {
  MaserParams p;
  p.a = a;
  p.n_b = n_b;
  p.Delta = Delta;
  const double lo = theta_fold(k + 1, a, Delta) + 1e-6;
  double hi;
  if (Delta != 0.0)
    hi = theta_maser_thermal(k, a, Delta) - 1e-6;
  else
    hi = lo + 40.0;
  if (hi <= lo)
    throw no_solution("theta_maser_maser: branches never coexist");

  auto g = [&](double th) -> double {
    p.theta = th;
    const auto mk = branch_minimum(k, p);
    const auto mk1 = branch_minimum(k + 1, p);
    if (!mk || !mk1) return detail::nan_value();
    return mk->v0 - mk1->v0;
  };
  const int n = 512;
  double prev_th = lo, prev_g = g(lo);
  for (int i = 1; i <= n; ++i) {
    const double th = lo + (hi - lo) * i / n;
    const double cur = g(th);
    if (std::isfinite(prev_g) && std::isfinite(cur) && prev_g < 0.0 &&
        cur >= 0.0)
      return detail::bisect(g, prev_th, th, 1e-12);
    prev_th = th;
    prev_g = cur;
  }
  throw no_solution("theta_maser_maser: depths never cross for branches " +
                    std::to_string(k) + ", " + std::to_string(k + 1));
}

// Detuning above which a thermal window opens between lobes k and k+1:
// branch k dies before branch k+1 takes over.  Returns the detuning and
// the common pump value at the crossing.
struct CriticalDetuning {
  double Delta = 0.0;
  double theta = 0.0;
};

inline CriticalDetuning critical_detuning(int k, double a, double n_b) {
  auto gap = [&](double D) -> double {
    try {
      return theta_maser_thermal(k, a, D) -
             detail2::thermal_maser_scan(k + 1, a, n_b, D, false);
    } catch (const maser_error &) {
      return detail::nan_value();
    }
  };
  const double d_lo = 0.05;
  const double d_hi = 0.95 * std::sqrt(2.0 * a - 1.0);
  const int n = 128;
  double prev_d = d_lo, prev_g = gap(d_lo);
  for (int i = 1; i <= n; ++i) {
    const double D = d_lo + (d_hi - d_lo) * i / n;
    const double cur = gap(D);
    if (std::isfinite(prev_g) && std::isfinite(cur) && prev_g > 0.0 &&
        cur <= 0.0) {
      const double D_star = detail::bisect(gap, prev_d, D, 1e-9);
      return {D_star, theta_maser_thermal(k, a, D_star)};
    }
    prev_d = D;
    prev_g = cur;
  }
  throw no_solution("critical_detuning: lines never cross for branch pair " +
                    std::to_string(k));
}

// Point where the maser-thermal line of branch k meets the thermal-maser
// line of branch k+1 as a varies: below a* a thermal strip separates the
// lobes.  h(a) = V0 of the branch-(k+1) minimum at the branch-k death line.
struct TriplePoint {
  double a = 0.0;
  double theta = 0.0;
};

inline TriplePoint triple_point(int k, double n_b, double Delta) {
  if (Delta == 0.0)
    throw no_solution("triple_point: requires nonzero detuning");
  auto h = [&](double a) -> double {
    try {
      const double th = theta_maser_thermal(k, a, Delta);
      MaserParams p;
      p.a = a;
      p.n_b = n_b;
      p.Delta = Delta;
      p.theta = th;
      const auto m = branch_minimum(k + 1, p);
      if (!m) return detail::nan_value();
      return m->v0;
    } catch (const maser_error &) {
      return detail::nan_value();
    }
  };
  const double a_lo = 0.5 + 0.5 * Delta * Delta + 1e-3;
  double prev_a = 1.0, prev_h = h(1.0);
  for (double a = 1.0 - 1e-3; a >= a_lo; a -= 1e-3) {
    const double cur = h(a);
    if (std::isfinite(prev_h) && std::isfinite(cur) && prev_h < 0.0 &&
        cur >= 0.0) {
      const double a_star = detail::bisect(h, a, prev_a, 1e-6);
      return {a_star, theta_maser_thermal(k, a_star, Delta)};
    }
    prev_a = a;
    prev_h = cur;
  }
  throw no_solution("triple_point: no degeneracy found for branch pair " +
                    std::to_string(k));
}

// Slope of the branch intensity, dx/dtheta = 2 C^{3/2} |sin(phi)|^3 /
// (tan(phi) - phi); infinite at the fold.
inline double dx_dtheta(double phi, double a) {
  const double C = potential::inversion(a);
  if (C <= 0.0)
    throw no_solution("dx_dtheta: no maser branches for a <= 1/2");
  const double s = std::abs(std::sin(phi));
  const double t = std::tan(phi) - phi;
  if (t == 0.0) return detail::inf;
  return 2.0 * C * std::sqrt(C) * s * s * s / t;
}

// Mean photon number of the zero-field (geometric) state,
// (n_b + a*theta_eff^2) / (1 + (1-2a)*theta_eff^2).
inline double thermal_n_mean(const MaserParams &p) {
  const double t2 = theta_eff2(p.theta, p.Delta);
  const double den = 1.0 + (1.0 - 2.0 * p.a) * t2;
  if (den <= 0.0)
    throw divergence_error("thermal_n_mean: geometric state diverges");
  return (p.n_b + p.a * t2) / den;
}

inline double thermal_x_mean(const MaserParams &p) {
  return thermal_n_mean(p) / p.N;
}

// Geometric-state mean along a pump grid; points past the divergence pole
// come back as NaN.  Periodic in theta with period pi/|Delta| for Delta != 0.
inline std::vector<double>
thermal_mean_profile(const MaserParams &base, const std::vector<double> &thetas) {
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double th : thetas) {
    MaserParams p = base;
    p.theta = th;
    try {
      out.push_back(thermal_n_mean(p));
    } catch (const divergence_error &) {
      out.push_back(detail::nan_value());
    }
  }
  return out;
}

enum class Phase { thermal, maser };

struct Classification {
  Phase phase = Phase::thermal;
  int branch = -1;
  bool coexistence = false;
  double v0_min = 0.0;
};

// Global phase at the operating point: maser if some minimum dips below
// the vacuum level V0 = 0, with a coexistence tag when the two deepest
// levels (vacuum included) sit within 10/N of each other.
inline Classification classify(const MaserParams &p) {
  Classification c;
  const auto saddles = potential::enumerate_saddles(p);
  std::vector<std::pair<double, int>> levels;
  levels.emplace_back(0.0, -1); // vacuum
  for (const auto &s : saddles)
    if (s.kind == potential::SaddleKind::minimum)
      levels.emplace_back(s.v0, s.branch);
  std::sort(levels.begin(), levels.end());
  c.v0_min = levels.front().first;
  c.branch = levels.front().second;
  c.phase = c.branch >= 0 ? Phase::maser : Phase::thermal;
  if (levels.size() > 1)
    c.coexistence = (levels[1].first - levels[0].first) < 10.0 / p.N;
  return c;
}

// Order parameter <x> = <n>/N of the full stationary state.
inline Moments order_parameter(const MaserParams &p) {
  return moments(stationary_distribution(p), p.N);
}

struct OrderPoint {
  double a = 0.0;
  double x_mean = 0.0;
  double x_std = 0.0;
};

inline std::vector<OrderPoint> order_parameter_vs_a(double theta, double n_b,
                                                    double Delta, double N,
                                                    double a_lo = 0.5,
                                                    double a_hi = 1.0,
                                                    double step = 0.002) {
  if (!(step > 0.0) || a_hi < a_lo)
    throw invalid_parameter("order_parameter_vs_a: bad a grid");
  std::vector<OrderPoint> out;
  for (double a = a_lo; a <= a_hi + 1e-12; a += step) {
    MaserParams p;
    p.a = std::min(a, 1.0);
    p.n_b = n_b;
    p.Delta = Delta;
    p.theta = theta;
    p.N = N;
    const auto m = moments(stationary_distribution(p), N);
    out.push_back({p.a, m.x_mean, m.x_std});
  }
  return out;
}

// Every critical pump value below theta_max at this a, labeled.  The
// thermal_validity entries are the poles of the geometric state,
// theta_eff^2 * (2a-1) = 1, one per lobe.
inline std::vector<std::pair<std::string, double>>
critical_lines(double a, double n_b, double Delta, double theta_max) {
  std::vector<std::pair<std::string, double>> out;
  auto keep = [&](const std::string &label, double th) {
    if (std::isfinite(th) && th > 0.0 && th <= theta_max)
      out.emplace_back(label, th);
  };
  try {
    keep("second_order", theta_0crit(a, Delta));
  } catch (const maser_error &) {
  }
  for (int k = 1; k < 32; ++k) {
    try {
      const double th = theta_fold(k, a, Delta);
      if (th > theta_max) break;
      keep("fold_" + std::to_string(k), th);
    } catch (const maser_error &) {
      break;
    }
  }
  for (int k = 0; k < 32; ++k) {
    try {
      const double th = theta_maser_thermal(k, a, Delta);
      if (th > theta_max) break;
      keep("maser_thermal_" + std::to_string(k), th);
    } catch (const maser_error &) {
      break;
    }
  }
  for (int k = 1; k < 32; ++k) {
    try {
      if (theta_fold(k, a, Delta) > theta_max) break;
      keep("thermal_maser_" + std::to_string(k),
           theta_thermal_maser(k, a, n_b, Delta));
    } catch (const no_solution &) {
      continue;
    } catch (const maser_error &) {
      break;
    }
  }
  for (int k = 0; k < 32; ++k) {
    try {
      if (theta_fold(k + 1, a, Delta) > theta_max) break;
      keep("maser_maser_" + std::to_string(k) + std::to_string(k + 1),
           theta_maser_maser(k, a, n_b, Delta));
    } catch (const maser_error &) {
      continue;
    }
  }
  {
    const double C = potential::inversion(a);
    if (C > 0.0) {
      auto g = [&](double th) { return 1.0 - C * theta_eff2(th, Delta); };
      int j = 0;
      const auto brackets = detail::scan_brackets(
          g, 1e-6, theta_max, static_cast<std::size_t>(theta_max / 0.01) + 8);
      for (auto [blo, bhi] : brackets)
        keep("thermal_validity_" + std::to_string(j++),
             detail::bisect(g, blo, bhi, 1e-12));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto &l, const auto &r) { return l.second < r.second; });
  return out;
}

// One labeled critical line as a polyline over the atom-inversion axis.
struct PhaseBoundary {
  std::string kind;
  std::vector<std::pair<double, double>> points; // (a, theta), a ascending
};

// All critical lines below theta_max assembled across an a grid, one
// polyline per label.  Lines are returned sorted by label.
inline std::vector<PhaseBoundary>
phase_diagram(double n_b, double Delta, double theta_max, double a_lo = 0.5,
              double a_hi = 1.0, double step = 0.002) {
  if (!(step > 0.0) || a_hi < a_lo)
    throw invalid_parameter("phase_diagram: bad a grid");
  std::map<std::string, PhaseBoundary> acc;
  for (double a = a_lo; a <= a_hi + 1e-12; a += step) {
    const double ac = std::min(a, 1.0);
    for (const auto &[label, th] : critical_lines(ac, n_b, Delta, theta_max)) {
      auto &b = acc[label];
      b.kind = label;
      b.points.emplace_back(ac, th);
    }
  }
  std::vector<PhaseBoundary> out;
  out.reserve(acc.size());
  for (auto &[label, b] : acc) out.push_back(std::move(b));
  return out;
}

} // namespace micromaser::phase
