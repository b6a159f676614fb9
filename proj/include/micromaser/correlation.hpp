#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "potential.hpp"
#include "roots.hpp"

namespace micromaser::correlation {

// Birth-death generator of the photon number in units of the cavity decay
// rate: lambda_n = n_b(n+1) + N a q_{n+1}, mu_n = (1+n_b)n + N b q_n, with
// a reflecting cut at the last state.  sym_* hold the similarity-symmetrized
// bands, off-diagonal -sqrt(lambda_n mu_{n+1}).  Exact zeros of lambda
// (trapping with n_b = 0) decouple the chain; block_dim is then the size of
// the leading ergodic block.
struct GeneratorMatrix {
  std::size_t dim = 0;
  bool block_decoupled = false;
  std::size_t block_dim = 0;
  std::vector<double> birth, death;
  std::vector<double> diag, sub, super;
  std::vector<double> sym_diag, sym_off;
  std::vector<double> log_pbar;
};

inline GeneratorMatrix build_generator(const MaserParams &p,
                                       std::size_t dim = 0) {
  p.validate();
  GeneratorMatrix G;
  if (dim == 0) dim = detail::n_max_rule(p) + 16;
  G.dim = dim;
  G.birth.resize(dim);
  G.death.resize(dim);
  for (std::size_t n = 0; n < dim; ++n) {
    const double nn = static_cast<double>(n);
    const double qn = q(nn / p.N, p.theta, p.Delta);
    const double qn1 = q((nn + 1.0) / p.N, p.theta, p.Delta);
    G.birth[n] = p.n_b * (nn + 1.0) + p.N * p.a * qn1;
    G.death[n] = (1.0 + p.n_b) * nn + p.N * p.b() * qn;
  }
  G.birth[dim - 1] = 0.0;

  G.diag.resize(dim);
  G.sub.assign(dim, 0.0);
  G.super.assign(dim, 0.0);
  for (std::size_t n = 0; n < dim; ++n) {
    G.diag[n] = G.birth[n] + G.death[n];
    if (n > 0) G.sub[n] = -G.birth[n - 1];
    if (n + 1 < dim) G.super[n] = -G.death[n + 1];
  }

  G.log_pbar.assign(dim, -detail::inf);
  G.log_pbar[0] = 0.0;
  for (std::size_t n = 1; n < dim; ++n) {
    if (G.birth[n - 1] <= 0.0) break;
    G.log_pbar[n] = G.log_pbar[n - 1] + std::log(G.birth[n - 1] / G.death[n]);
  }
  const double logz = detail::logsumexp(G.log_pbar);
  for (auto &lw : G.log_pbar) lw -= logz;

  G.block_dim = dim;
  for (std::size_t n = 0; n + 1 < dim; ++n) {
    if (G.birth[n] == 0.0) {
      G.block_decoupled = true;
      G.block_dim = n + 1;
      break;
    }
  }
  G.sym_diag = G.diag;
  G.sym_off.assign(dim - 1, 0.0);
  for (std::size_t n = 0; n + 1 < dim; ++n)
    G.sym_off[n] = -std::sqrt(G.birth[n] * G.death[n + 1]);
  return G;
}

namespace detail2 {

// Gershgorin bound on the spectrum of the (leading block of the)
// symmetrized generator; eps times this is the resolvable eigenvalue floor.
inline double spectral_bound(const GeneratorMatrix &G) {
  const std::size_t n = G.block_decoupled ? G.block_dim : G.dim;
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = G.sym_diag[i];
    if (i > 0) r += std::abs(G.sym_off[i - 1]);
    if (i + 1 < n) r += std::abs(G.sym_off[i]);
    hi = std::max(hi, r);
  }
  return hi;
}

// LDL^T pivot count: eigenvalues of the symmetric tridiagonal below t.
inline int count_below(const std::vector<double> &d,
                       const std::vector<double> &e, std::size_t n, double t) {
  int cnt = 0;
  double piv = d[0] - t;
  if (piv < 0.0) ++cnt;
  for (std::size_t i = 1; i < n; ++i) {
    double denom = piv;
    if (denom == 0.0) denom = -1e-300;
    piv = (d[i] - t) - e[i - 1] * e[i - 1] / denom;
    if (piv < 0.0) ++cnt;
  }
  return cnt;
}

} // namespace detail2

// Smallest nonzero eigenvalue of the (leading block of the) symmetrized
// generator by Sturm bisection.  The descent switches to geometric steps
// while the lower edge is still at zero, so gaps far below machine scale
// are still located.
inline double lambda_nz(const GeneratorMatrix &G) {
  const std::size_t n = G.block_decoupled ? G.block_dim : G.dim;
  if (n < 2)
    throw no_solution("lambda_nz: ergodic block has no relaxation mode");
  double hi = detail2::spectral_bound(G);
  double lo = 0.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo > 0.0 ? 0.5 * (lo + hi) : hi / 1024.0;
    if (mid <= lo || mid >= hi || mid < 1e-308) break;
    if (detail2::count_below(G.sym_diag, G.sym_off, n, mid) >= 2)
      hi = mid;
    else
      lo = mid;
    if (lo > 0.0 && hi - lo <= 1e-13 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// Dense spectrum of the symmetrized ergodic block (reference path for the
// banded solver).
inline std::vector<double> dense_eigenvalues(const GeneratorMatrix &G) {
  const std::size_t n = G.block_decoupled ? G.block_dim : G.dim;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    S(i, i) = G.sym_diag[i];
    if (i + 1 < n) {
      S(i, i + 1) = G.sym_off[i];
      S(i + 1, i) = G.sym_off[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S,
                                                    Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(),
                         es.eigenvalues().data() + n);
  std::sort(ev.begin(), ev.end());
  return ev;
}

// Probabilities of the two atomic exit channels against the stationary
// field: P(+) = sum_j [a(1-q_{j+1}) + b q_j] pbar_j, and the complementary
// channel summed directly.
struct AtomStatistics {
  double p_plus = 0.0;
  double p_minus = 0.0;
};

inline AtomStatistics atom_statistics(const MaserParams &p) {
  const auto d = stationary_distribution(p);
  AtomStatistics s;
  for (std::size_t j = 0; j < d.probs.size(); ++j) {
    const double qj = q(static_cast<double>(j) / p.N, p.theta, p.Delta);
    const double qj1 = q(static_cast<double>(j + 1) / p.N, p.theta, p.Delta);
    s.p_plus += (p.a * (1.0 - qj1) + p.b() * qj) * d.probs[j];
    s.p_minus += (p.b() * (1.0 - qj) + p.a * qj1) * d.probs[j];
  }
  return s;
}

// Two-atom joint statistics.  Measurement operators in the photon basis:
//   (M(+)v)_i = a(1-q_{i+1}) v_i + b q_{i+1} v_{i+1}
//   (M(-)v)_i = b(1-q_i) v_i + a q_i v_{i-1}
// Each detection is followed by the mean damping between atoms,
// S(s) = (1 + L_C/N)^{-1} M(s), applied by a tridiagonal solve.
// Propagation over the atom separation tau (units of 1/gamma) uses the
// spectral decomposition of the symmetrized generator.
class JointEvolver {
public:
  explicit JointEvolver(const MaserParams &params) : p_(params) {
    const auto G = build_generator(p_);
    n_ = G.block_decoupled ? G.block_dim : G.dim;
    qv_.resize(n_ + 1);
    for (std::size_t j = 0; j <= n_; ++j)
      qv_[j] = q(static_cast<double>(j) / p_.N, p_.theta, p_.Delta);

    std::vector<double> lw(G.log_pbar.begin(), G.log_pbar.begin() + n_);
    const double logz = detail::logsumexp(lw);
    pbar_.resize(n_);
    sqp_.resize(n_);
    isqp_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      pbar_[i] = std::exp(lw[i] - logz);
      sqp_[i] = std::sqrt(pbar_[i]);
      isqp_[i] = 1.0 / sqp_[i];
    }

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
      S(i, i) = G.sym_diag[i];
      if (i + 1 < n_) {
        S(i, i + 1) = G.sym_off[i];
        S(i + 1, i) = G.sym_off[i];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    U_ = es.eigenvectors();
    lam_ = es.eigenvalues();

    // bands of I + L_C/N with a reflecting cut
    cd_.resize(n_);
    cl_.resize(n_);
    cu_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double lcb = i + 1 < n_ ? p_.n_b * (i + 1.0) : 0.0;
      const double lcd = (1.0 + p_.n_b) * static_cast<double>(i);
      cd_[i] = 1.0 + (lcb + lcd) / p_.N;
      cl_[i] = i > 0 ? -(p_.n_b * static_cast<double>(i)) / p_.N : 0.0;
      cu_[i] = i + 1 < n_ ? -((1.0 + p_.n_b) * (i + 1.0)) / p_.N : 0.0;
    }
  }

  std::size_t dim() const { return n_; }

  double joint(int s_late, int s_early, double tau) const {
    Eigen::VectorXd v = apply_m(s_early, pbar_);
    damp(v);
    Eigen::VectorXd y = v.cwiseProduct(isqp_);
    y = U_.transpose() * y;
    for (std::size_t i = 0; i < n_; ++i)
      y[i] *= std::exp(-lam_[i] * tau);
    y = U_ * y;
    y = y.cwiseProduct(sqp_);
    Eigen::VectorXd z = apply_m(s_late, y);
    damp(z);
    return z.sum();
  }

  double channel_probability(int s) const {
    Eigen::VectorXd v = apply_m(s, pbar_);
    damp(v);
    return v.sum();
  }

private:
  Eigen::VectorXd apply_m(int s, const Eigen::VectorXd &v) const {
    Eigen::VectorXd out(n_);
    if (s > 0) {
      for (std::size_t i = 0; i < n_; ++i) {
        out[i] = p_.a * (1.0 - qv_[i + 1]) * v[i];
        if (i + 1 < n_) out[i] += p_.b() * qv_[i + 1] * v[i + 1];
      }
    } else {
      for (std::size_t i = 0; i < n_; ++i) {
        out[i] = p_.b() * (1.0 - qv_[i]) * v[i];
        if (i > 0) out[i] += p_.a * qv_[i] * v[i - 1];
      }
    }
    return out;
  }

  void damp(Eigen::VectorXd &v) const {
    // Thomas solve of (I + L_C/N) y = v
    std::vector<double> cp(n_), dp(n_);
    cp[0] = cu_[0] / cd_[0];
    dp[0] = v[0] / cd_[0];
    for (std::size_t i = 1; i < n_; ++i) {
      const double m = cd_[i] - cl_[i] * cp[i - 1];
      cp[i] = i + 1 < n_ ? cu_[i] / m : 0.0;
      dp[i] = (v[i] - cl_[i] * dp[i - 1]) / m;
    }
    v[n_ - 1] = dp[n_ - 1];
    for (std::size_t i = n_ - 1; i-- > 0;) v[i] = dp[i] - cp[i] * v[i + 1];
  }

  MaserParams p_;
  std::size_t n_ = 0;
  std::vector<double> qv_;
  Eigen::VectorXd pbar_, sqp_, isqp_;
  Eigen::MatrixXd U_;
  Eigen::VectorXd lam_;
  std::vector<double> cd_, cl_, cu_;
};

inline double joint_probability(int s_late, int s_early, double tau,
                                const MaserParams &p) {
  return JointEvolver(p).joint(s_late, s_early, tau);
}

// Normalized two-atom correlation gamma_A(t) = (<s s'> - <s>^2)/(1 - <s>^2)
// with s = +/-1 the exit channel.
inline double gamma_A(double tau, const MaserParams &p) {
  const JointEvolver ev(p);
  const double pp = ev.channel_probability(+1);
  const double s_mean = 2.0 * pp - 1.0;
  const double norm = 1.0 - s_mean * s_mean;
  if (norm <= 1e-300)
    throw divergence_error("gamma_A: every atom exits one channel, nothing "
                           "left to normalize");
  const double ss = ev.joint(+1, +1, tau) + ev.joint(-1, -1, tau) -
                    ev.joint(+1, -1, tau) - ev.joint(-1, +1, tau);
  return (ss - s_mean * s_mean) / norm;
}

// Decay rate of the two-atom channel correlation, fitted on the exponential
// tail t in [3,8]/lambda of ln|P(+,+;t) - P(+)^2|.
inline double gamma_A_rate(const MaserParams &p) {
  const JointEvolver ev(p);
  const double lam = lambda_nz(build_generator(p));
  const double pp = ev.channel_probability(+1);
  const int npts = 11;
  std::vector<double> ts, ys;
  for (int i = 0; i < npts; ++i) {
    const double t = (3.0 + 5.0 * i / (npts - 1.0)) / lam;
    const double c = ev.joint(+1, +1, t) - pp * pp;
    if (c == 0.0 || !std::isfinite(c)) continue;
    ts.push_back(t);
    ys.push_back(std::log(std::abs(c)));
  }
  if (ts.size() < 3)
    throw no_solution("gamma_A: correlation tail below numerical floor");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double m = ts.size();
  return -(m * sty - st * sy) / (m * stt - st * st);
}

struct CorrelationResult {
  double lambda_nz = 0.0;
  double gamma_xi = 0.0;
  double log_gamma_xi = 0.0;
  std::size_t dim = 0;
  bool block_decoupled = false;
  bool asymptotic = false;
};

// Barrier-penetration estimate between the two deepest wells, kept in log
// form:  gamma*xi ~ 2*pi / (rate(x1) sqrt(-V''(x1)) f), with
// f = sqrt(V''(x0)) e^{-N(V1-V0)} + sqrt(V''(x2)) e^{-N(V1-V2)}.
// delta_v0 is the smaller of the two barrier heights, the asymptotic slope
// of ln(gamma*xi) in N.
struct BarrierEstimate {
  double log_gamma_xi = 0.0;
  double delta_v0 = 0.0;
};

inline BarrierEstimate xi_barrier_full(const MaserParams &p) {
  const auto saddles = potential::enumerate_saddles(p);
  std::vector<const potential::SaddlePoint *> minima;
  for (const auto &s : saddles)
    if (s.kind == potential::SaddleKind::minimum) minima.push_back(&s);
  if (minima.size() < 2)
    throw no_solution("xi_barrier: needs two potential wells");
  std::sort(minima.begin(), minima.end(),
            [](const potential::SaddlePoint *l, const potential::SaddlePoint *r) {
              return l->v0 < r->v0;
            });
  const potential::SaddlePoint *m0 = minima[0];
  const potential::SaddlePoint *m2 = minima[1];
  if (m0->x > m2->x) std::swap(m0, m2);
  const potential::SaddlePoint *top = nullptr;
  for (const auto &s : saddles)
    if (s.kind == potential::SaddleKind::maximum && s.x > m0->x &&
        s.x < m2->x && (!top || s.v0 > top->v0))
      top = &s;
  if (!top)
    throw no_solution("xi_barrier: no barrier between the two wells");
  const double rate =
      top->x * (1.0 + p.n_b) + p.b() * q(top->x, p.theta, p.Delta);
  const double f_log = detail::logaddexp(
      0.5 * std::log(m0->curvature) - p.N * (top->v0 - m0->v0),
      0.5 * std::log(m2->curvature) - p.N * (top->v0 - m2->v0));
  BarrierEstimate r;
  r.log_gamma_xi = std::log(2.0 * detail::pi) - std::log(rate) -
                   0.5 * std::log(-top->curvature) - f_log;
  r.delta_v0 = top->v0 - std::max(m0->v0, m2->v0);
  return r;
}

inline double xi_barrier_log(const MaserParams &p) {
  return xi_barrier_full(p).log_gamma_xi;
}

inline double xi_barrier(const MaserParams &p) {
  return std::exp(xi_barrier_log(p));
}

// Exact correlation length gamma*xi = 1/lambda_nz with a dimension-doubling
// consistency check.  Sturm bisection cannot resolve a gap below the
// roundoff scale eps*||L|| of the symmetrized matrix (it returns the noise
// floor of the zero mode instead); below that the result is the barrier
// estimate, flagged asymptotic.
inline CorrelationResult xi_exact(const MaserParams &p) {
  const auto G1 = build_generator(p);
  const double l1 = lambda_nz(G1);
  const auto G2 = build_generator(p, 2 * G1.dim);
  const double l2 = lambda_nz(G2);
  CorrelationResult r;
  r.dim = G2.dim;
  r.block_decoupled = G2.block_decoupled;
  r.lambda_nz = l2;
  const double floor = 256.0 * std::numeric_limits<double>::epsilon() *
                       detail2::spectral_bound(G2);
  if (l2 < floor) {
    r.asymptotic = true;
    r.log_gamma_xi = xi_barrier_log(p);
    r.gamma_xi = std::exp(r.log_gamma_xi);
    return r;
  }
  if (std::abs(l1 - l2) > 1e-6 * l2)
    throw truncation_error("xi_exact: gap shifted by " +
                           std::to_string(std::abs(l1 - l2) / l2) +
                           " under dimension doubling");
  r.gamma_xi = 1.0 / l2;
  r.log_gamma_xi = -std::log(l2);
  return r;
}

// Fluctuation estimate: gamma*xi_E = Var(n) / ((1+n_b)<n> + N b <q_n>).
inline double xi_E(const MaserParams &p) {
  const auto d = stationary_distribution(p);
  const auto m = moments(d, p.N);
  double qmean = 0.0;
  for (std::size_t n = 0; n < d.probs.size(); ++n)
    qmean += q(static_cast<double>(n) / p.N, p.theta, p.Delta) * d.probs[n];
  return m.n_var / ((1.0 + p.n_b) * m.n_mean + p.N * p.b() * qmean);
}

// Small-amplitude estimate around the vacuum:
// gamma*xi_M = 1/sqrt(alpha^2 + 4 beta gamma_c / N).
inline double xi_M(const MaserParams &p) {
  const double C = potential::inversion(p.a);
  const double t2 = theta_eff2(p.theta, p.Delta);
  const double alpha = 1.0 - C * t2;
  const double gc = p.n_b + p.a * t2;
  const double u = p.theta * std::abs(p.Delta);
  double beta;
  if (u < 1e-3) {
    const double th4 = p.theta * p.theta * p.theta * p.theta;
    beta = C * th4 * (1.0 / 3.0 - 4.0 * u * u / 45.0);
  } else {
    const double s = std::sin(u), c = std::cos(u);
    const double ad = std::abs(p.Delta);
    beta = C * (s * s / (ad * ad * ad * ad) - p.theta * s * c / (ad * ad * ad));
  }
  return 1.0 / std::sqrt(alpha * alpha + 4.0 * beta * gc / p.N);
}

// Height of the first xi_M peak at the continuous threshold:
// (C/2) sqrt(N/(a + n_b C)) * chi(theta_0* |Delta|),
// chi(x) = sqrt(sin^2 x / (1 - x cot x)), chi(0) = sqrt(3).
inline double xi_M_peak(double a, double n_b, double Delta, double N) {
  const double C = potential::inversion(a);
  if (!(a <= 1.0) || C < Delta * Delta)
    throw invalid_parameter(
        "xi_M_peak: requires 1/2 + Delta^2/2 <= a <= 1");
  if (C == 0.0) return 0.0;
  const double x = std::asin(std::abs(Delta) / std::sqrt(C));
  double chi;
  if (x < 1e-4) {
    chi = std::sqrt(3.0) * (1.0 - x * x / 5.0);
  } else {
    const double s = std::sin(x);
    chi = std::sqrt(s * s / (1.0 - x * std::cos(x) / s));
  }
  return 0.5 * C * std::sqrt(N / (a + n_b * C)) * chi;
}

// Mean-field branch with its 1/N corrections.  x0 solves the quadratic
// closure, theta(phi) the self-consistency; gamma*xi_MF = 1/(1 - C q'(phi)).
struct MeanFieldPoint {
  double phi = 0.0;
  double x0 = 0.0;
  double theta = 0.0;
  double gamma_xi = 0.0;
};

inline MeanFieldPoint xi_MF_point(const MaserParams &p) {
  const double C = potential::inversion(p.a);
  if (C <= 0.0)
    throw invalid_parameter(
        "xi_MF: needs a > 1/2; use xi_E in the thermal regime");
  const double f = p.a / C;
  const double D2 = p.Delta * p.Delta;
  auto x0_of = [&](double phi) {
    const double s = std::sin(phi);
    const double h = (f - p.n_b) / p.N + D2 - C * s * s;
    const double g = p.n_b * f / (p.N * p.N) + D2 * p.n_b / p.N +
                     (f / p.N) * C * s * s;
    const double disc = h * h + 4.0 * g;
    if (disc < 0.0) return detail::nan_value();
    return 0.5 * (-h + std::sqrt(disc));
  };
  auto theta_of = [&](double phi) {
    const double x0 = x0_of(phi);
    const double s = x0 + f / p.N + D2;
    if (!(s > 0.0) || !std::isfinite(x0)) return detail::nan_value();
    return phi / std::sqrt(s);
  };
  auto g = [&](double phi) { return theta_of(phi) - p.theta; };
  const auto brackets =
      detail::scan_brackets(g, 1e-8, detail::pi - 1e-8, 512);
  if (brackets.empty())
    throw no_solution("xi_MF: self-consistency equation has no solution");
  const double phi = detail::bisect(g, brackets.front().first,
                                    brackets.front().second, 1e-13);
  MeanFieldPoint r;
  r.phi = phi;
  r.x0 = x0_of(phi);
  r.theta = theta_of(phi);
  const double s = std::sin(phi), c = std::cos(phi);
  const double u = r.x0 + f / p.N;
  const double denom = u + D2;
  const double qp = (D2 * s * s + u * phi * s * c) / (denom * denom);
  r.gamma_xi = 1.0 / (1.0 - C * qp);
  return r;
}

inline double xi_MF(const MaserParams &p) { return xi_MF_point(p).gamma_xi; }

// Zero-amplitude limit of the mean-field length, 1/(1 - C theta_eff^2).
inline double xi_MF_thermal(const MaserParams &p) {
  const double C = potential::inversion(p.a);
  const double al = 1.0 - C * theta_eff2(p.theta, p.Delta);
  if (al <= 0.0)
    throw divergence_error("xi_MF_thermal: thermal state unstable here");
  return 1.0 / al;
}

// First mean-field peak: phi* ~ (3(n_b+f)/(N C))^{1/4}, height
// (C/2) sqrt(3N/(a + n_b C)).
inline double xi_MF_peak(double a, double n_b, double N) {
  const double C = potential::inversion(a);
  if (C <= 0.0)
    throw invalid_parameter("xi_MF_peak: requires a > 1/2");
  return 0.5 * C * std::sqrt(3.0 * N / (a + n_b * C));
}

// Exact sum rule for the correlation length.  The thermal harmonic piece
// (1 - (n_b/(1+n_b))^n)/n is subtracted term by term; both series diverge
// separately and only their difference converges, so everything stays in
// log space until the subtraction.
inline double xi_sumrule(const MaserParams &p) {
  const auto d = stationary_distribution(p);
  const std::size_t n_max = d.n_max;
  std::vector<double> logp(n_max + 1);
  {
    const double logz = detail::logsumexp(d.log_weights);
    for (std::size_t n = 0; n <= n_max; ++n)
      logp[n] = d.log_weights[n] - logz;
  }
  std::vector<double> logP(n_max + 1, -detail::inf),
      logT(n_max + 1, -detail::inf);
  for (std::size_t n = 1; n <= n_max; ++n)
    logP[n] = detail::logaddexp(logP[n - 1], logp[n - 1]);
  logT[n_max] = logp[n_max];
  for (std::size_t n = n_max; n-- > 1;)
    logT[n] = detail::logaddexp(logT[n + 1], logp[n]);

  const double lr = p.n_b > 0.0 ? std::log(p.n_b / (1.0 + p.n_b)) : -detail::inf;
  double acc = 0.0;
  int quiet = 0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double nn = static_cast<double>(n);
    const double mu = (1.0 + p.n_b) * nn +
                      p.N * p.b() * q(nn / p.N, p.theta, p.Delta);
    double t1 = 0.0;
    if (logp[n] != -detail::inf)
      t1 = std::exp(logP[n] + logT[n] - std::log(mu) - logp[n]);
    const double tp =
        p.n_b > 0.0 ? -std::expm1(nn * lr) / nn : 1.0 / nn;
    const double term = t1 - tp;
    acc += term;
    if (n > 64 && std::abs(term) < 1e-17 * (1.0 + std::abs(acc))) {
      if (++quiet >= 3) break;
    } else {
      quiet = 0;
    }
  }
  return 1.0 + acc;
}

} // namespace micromaser::correlation
