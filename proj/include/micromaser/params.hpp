#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace micromaser {

// Dimensionless operating point of the pumped cavity.
//   a      probability the injected atom is in its upper level
//   n_b    thermal photon number of the reservoir
//   Delta  scaled detuning (detuning over 2g, divided by sqrt(N); signed)
//   theta  pump parameter g*tau*sqrt(N)
//   N      atomic flux per photon lifetime, R/gamma
struct MaserParams {
  double a = 1.0;
  double n_b = 0.15;
  double Delta = 0.0;
  double theta = 1.0;
  double N = 100.0;

  double b() const { return 1.0 - a; }

  void validate() const {
    if (!(a >= 0.0 && a <= 1.0))
      throw invalid_parameter("a must lie in [0,1], got " + std::to_string(a));
    if (!(n_b >= 0.0))
      throw invalid_parameter("n_b must be >= 0, got " + std::to_string(n_b));
    if (!(N > 0.0))
      throw invalid_parameter("N must be > 0, got " + std::to_string(N));
    if (!(theta >= 0.0))
      throw invalid_parameter("theta must be >= 0, got " +
                              std::to_string(theta));
    if (!std::isfinite(Delta))
      throw invalid_parameter("Delta must be finite");
  }
};

// Laboratory-scale quantities.
//   g            atom-field coupling (rad/s)
//   tau          transit time (s)
//   delta_omega  cavity-atom frequency mismatch (rad/s)
//   R            injection rate (1/s)
//   gamma        cavity decay rate (1/s)
struct PhysicalParams {
  double g = 0.0;
  double tau = 0.0;
  double delta_omega = 0.0;
  double R = 0.0;
  double gamma = 0.0;
};

// Scaled parameters from laboratory ones: N = R/gamma, theta = g*tau*sqrt(N),
// Delta = (delta_omega/2g)/sqrt(N).  The sign of delta_omega is kept.
inline MaserParams from_physical(const PhysicalParams &p, double a,
                                 double n_b) {
  if (!(p.gamma > 0.0))
    throw invalid_parameter("gamma must be > 0");
  if (!(p.R > 0.0))
    throw invalid_parameter("R must be > 0");
  if (!(p.g > 0.0))
    throw invalid_parameter("g must be > 0");
  if (!(p.tau > 0.0))
    throw invalid_parameter("tau must be > 0");
  MaserParams m;
  m.a = a;
  m.n_b = n_b;
  m.N = p.R / p.gamma;
  const double rootN = std::sqrt(m.N);
  m.theta = p.g * p.tau * rootN;
  m.Delta = (p.delta_omega / (2.0 * p.g)) / rootN;
  m.validate();
  return m;
}

} // namespace micromaser
