#include <catch2/catch_amalgamated.hpp>

#include <micromaser/micromaser.hpp>

#include <cmath>
#include <vector>

using Catch::Approx;
using namespace micromaser;

namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

// a at which pump gain and cavity loss cancel exactly, a/b = n_b/(1+n_b)
double equilibrium_a(double n_b) { return n_b / (1.0 + 2.0 * n_b); }

} // namespace

TEST_CASE("physical to scaled parameter map") {
  PhysicalParams ph;
  ph.g = 1.0;
  ph.tau = 1.0;
  ph.R = 100.0;
  ph.gamma = 1.0;
  ph.delta_omega = 0.0;
  auto m = from_physical(ph, 1.0, 0.15);
  CHECK(m.N == Approx(100.0));
  CHECK(m.theta == Approx(10.0));
  CHECK(m.Delta == 0.0);

  ph.g = 3.0;
  m = from_physical(ph, 0.8, 0.0);
  CHECK(m.Delta == 0.0);

  ph.g = 1.0;
  ph.delta_omega = 10.0; // delta = 5, Delta = 5/sqrt(100)
  m = from_physical(ph, 1.0, 0.15);
  CHECK(m.Delta == Approx(0.5));

  ph.delta_omega = -10.0; // sign survives the scaling
  m = from_physical(ph, 1.0, 0.15);
  CHECK(m.Delta == Approx(-0.5));

  PhysicalParams bad = ph;
  bad.g = 0.0;
  CHECK_THROWS_AS(from_physical(bad, 1.0, 0.15), invalid_parameter);
  bad = ph;
  bad.tau = -1.0;
  CHECK_THROWS_AS(from_physical(bad, 1.0, 0.15), invalid_parameter);
  bad = ph;
  bad.R = 0.0;
  CHECK_THROWS_AS(from_physical(bad, 1.0, 0.15), invalid_parameter);
  bad = ph;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(from_physical(bad, 1.0, 0.15), invalid_parameter);
}

TEST_CASE("emission probability q") {
  CHECK(q(0.25, pi, 0.0) == Approx(1.0).margin(1e-14));
  CHECK(q(1.0, pi, 0.0) == 0.0); // trapping zero, bitwise
  CHECK(q(0.0, 2.0, 0.5) == 0.0);
  CHECK_THROWS_AS(q(-1e-9, 1.0, 0.0), invalid_parameter);

  SECTION("bounded by 1 and by the detuning prefactor") {
    for (double Delta : {0.0, 0.5, -0.7}) {
      for (double theta : {0.3, 1.0, 5.0, 17.0}) {
        for (int i = 0; i <= 400; ++i) {
          const double x = 20.0 * i / 400.0;
          const double v = q(x, theta, Delta);
          CHECK(v >= 0.0);
          const double cap =
              x == 0.0 ? 0.0 : std::min(1.0, x / (x + Delta * Delta));
          CHECK(v <= cap + 1e-15);
        }
      }
    }
  }

  SECTION("series branch joins the closed form") {
    const double Delta = 0.3;
    // u = theta*sqrt(x+Delta^2) straddles the series cutoff at 1e-4
    for (double u : {0.5e-4, 0.99e-4, 1.01e-4, 2e-4}) {
      const double theta = u / std::sqrt(1e-8 + Delta * Delta);
      const double direct =
          1e-8 / (1e-8 + Delta * Delta) * std::pow(std::sin(u), 2);
      CHECK(q(1e-8, theta, Delta) == Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("gain-loss ratio w") {
  SECTION("equilibrium pumping leaves the thermal ratio at every x") {
    MaserParams p;
    p.n_b = 2.0;
    p.a = equilibrium_a(p.n_b); // 0.4
    p.theta = 3.7;
    p.Delta = 0.3;
    for (double x : {0.0, 1e-6, 0.01, 0.3, 1.0, 5.0})
      CHECK(w(x, p) == Approx(2.0 / 3.0).epsilon(1e-12));
  }

  SECTION("unit ratio at a potential extremum") {
    MaserParams p;
    p.a = 0.8;
    p.n_b = 0.15;
    p.Delta = 0.2;
    const double phi = 2.0;
    p.theta = potential::theta_of_phi(phi, p.a);
    const double x = potential::x_of_phi(phi, p.a, p.Delta);
    REQUIRE(x > 0.0);
    CHECK(w(x, p) == Approx(1.0).epsilon(1e-12));
  }

  SECTION("direct rational evaluation") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.Delta = 0.0;
    p.theta = 1.0;
    const double x = 0.1;
    const double qx = std::pow(std::sin(std::sqrt(0.1)), 2);
    const double expect = (0.15 * x + qx) / (1.15 * x);
    CHECK(w(x, p) == Approx(expect).epsilon(1e-13));
  }

  CHECK_THROWS_AS(w(-0.1, MaserParams{}), invalid_parameter);
}

TEST_CASE("effective pump parameter") {
  CHECK(theta_eff2(3.3, 0.0) == Approx(3.3 * 3.3).epsilon(1e-15));
  CHECK(theta_eff2(2.0 * pi, 0.5) == 0.0); // theta*Delta = pi
  CHECK(theta_eff2(pi / 3.0, 0.5) == Approx(1.0).epsilon(1e-12));

  SECTION("series branch joins the closed form") {
    for (double u : {0.5e-4, 0.99e-4, 1.01e-4, 2e-4}) {
      const double Delta = 1e-3;
      const double theta = u / Delta;
      const double direct = std::pow(std::sin(u) / Delta, 2);
      CHECK(theta_eff2(theta, Delta) == Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("stationary distribution") {
  SECTION("equilibrium pumping gives a geometric state") {
    MaserParams p;
    p.n_b = 0.15;
    p.a = equilibrium_a(p.n_b);
    p.theta = 4.2;
    p.Delta = 0.3;
    p.N = 50.0;
    const auto d = stationary_distribution(p);
    const double r = 0.15 / 1.15;
    for (std::size_t n = 1; n < d.probs.size(); ++n) {
      if (d.probs[n] < 1e-300) break;
      CHECK(d.probs[n] / d.probs[n - 1] == Approx(r).epsilon(1e-12));
    }
    CHECK(moments(d, p.N).n_mean == Approx(0.15).margin(1e-10));

    const auto g = thermal_distribution(p);
    const std::size_t m = std::min(d.probs.size(), g.probs.size());
    for (std::size_t n = 0; n < m; ++n)
      CHECK(d.probs[n] == Approx(g.probs[n]).margin(1e-12));
  }

  SECTION("trapping cuts the support exactly") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.0;
    p.theta = 2.0 * pi; // q(n/N) = 0 first at n = 25 for N = 100
    p.Delta = 0.0;
    p.N = 100.0;
    const auto d = stationary_distribution(p);
    CHECK(d.n_max == 24);
    CHECK(d.probs.size() == 25);
    CHECK(d.probs.back() > 0.0);
    CHECK(d.tail_mass_bound == 0.0);
    double s = 0.0;
    for (double v : d.probs) s += v;
    CHECK(s == Approx(1.0).margin(1e-12));
  }

  SECTION("no pumping at zero temperature leaves the vacuum") {
    MaserParams p;
    p.a = 0.0;
    p.n_b = 0.0;
    p.theta = 3.0;
    p.N = 100.0;
    const auto d = stationary_distribution(p);
    REQUIRE(d.probs.size() == 1);
    CHECK(d.probs[0] == 1.0);
    CHECK(d.n_max == 0);
  }

  SECTION("mean field tracks the lowest maser branch") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.theta = 5.0;
    p.N = 1000.0;
    const auto m = moments(stationary_distribution(p), p.N);
    // branch-0 minimum at theta = 5: solve phi/sin(phi) = theta
    const auto saddles = potential::enumerate_saddles(p);
    REQUIRE_FALSE(saddles.empty());
    double x0 = -1.0;
    for (const auto &s : saddles)
      if (s.branch == 0 && s.kind == potential::SaddleKind::minimum) x0 = s.x;
    REQUIRE(x0 > 0.0);
    CHECK(m.x_mean == Approx(x0).epsilon(0.02));
  }
}

TEST_CASE("moments bookkeeping") {
  SECTION("vacuum point mass") {
    MaserParams p;
    p.a = 0.0;
    p.n_b = 0.0;
    p.theta = 1.0;
    const auto m = moments(stationary_distribution(p), p.N);
    CHECK(m.n_mean == 0.0);
    CHECK(m.n_var == 0.0);
    REQUIRE(m.cumulative.size() >= 2);
    CHECK(m.cumulative[0] == 0.0);
    CHECK(m.cumulative[1] == 1.0);
  }

  SECTION("cumulative ends at unity and q_mean stays in range") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.theta = 5.0;
    p.N = 100.0;
    const auto d = stationary_distribution(p);
    const auto m = moments(d, p);
    CHECK(m.cumulative.back() == Approx(1.0).margin(1e-12));
    CHECK(m.q_mean > 0.0);
    CHECK(m.q_mean <= 1.0);
  }
}

TEST_CASE("thermal distribution closed form") {
  SECTION("ratio at small pump") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.theta = 0.5;
    p.Delta = 0.0;
    const auto d = thermal_distribution(p);
    const double r = (0.15 + 0.25) / 1.15;
    REQUIRE(d.probs.size() >= 2);
    CHECK(d.probs[1] / d.probs[0] == Approx(r).epsilon(1e-14));
    CHECK(moments(d, p.N).n_mean == Approx(r / (1.0 - r)).epsilon(1e-12));
  }

  SECTION("pump tuned out by detuning leaves the bath state") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.theta = 2.0 * pi;
    p.Delta = 0.5; // theta*Delta = pi, theta_eff = 0
    const auto d = thermal_distribution(p);
    CHECK(moments(d, p.N).n_mean == Approx(0.15).margin(1e-10));
  }

  SECTION("diverges at the continuous threshold") {
    MaserParams p;
    p.a = 1.0;
    p.n_b = 0.15;
    p.theta = 1.0;
    p.Delta = 0.0;
    CHECK_THROWS_AS(thermal_distribution(p), divergence_error);
  }
}

TEST_CASE("distribution invariants across a parameter grid") {
  for (double theta : {0.5, 3.0, 5.0, 7.0, 11.0}) {
    for (double a : {0.3, 0.75, 1.0}) {
      for (double n_b : {0.0, 0.15, 2.0}) {
        for (double Delta : {0.0, 0.5}) {
          MaserParams p;
          p.a = a;
          p.n_b = n_b;
          p.theta = theta;
          p.Delta = Delta;
          p.N = 100.0;
          const auto d = stationary_distribution(p);
          double s = 0.0;
          for (double v : d.probs) {
            CHECK(v >= 0.0);
            s += v;
          }
          CHECK(s == Approx(1.0).margin(1e-12));
          CHECK(d.tail_mass_bound < 1e-14);

          // detailed-balance ratios reproduce the construction
          for (std::size_t n = 1; n < d.probs.size(); ++n) {
            if (d.probs[n] < 1e-250 || d.probs[n - 1] < 1e-250) continue;
            const double qn = q(static_cast<double>(n) / p.N, theta, Delta);
            const double num = n_b * n + p.N * a * qn;
            const double den = (1.0 + n_b) * n + p.N * (1.0 - a) * qn;
            CHECK(d.probs[n] / d.probs[n - 1] ==
                  Approx(num / den).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("geometric form approximates the exact mean at large flux") {
  MaserParams p;
  p.a = 0.3;
  p.n_b = 0.15;
  p.theta = 1.2;
  p.Delta = 0.0;
  const double geo = moments(thermal_distribution(p), p.N).n_mean;
  p.N = 1e3;
  const double e3 =
      std::abs(moments(stationary_distribution(p), p.N).n_mean - geo);
  p.N = 1e4;
  const double e4 =
      std::abs(moments(stationary_distribution(p), p.N).n_mean - geo);
  REQUIRE(e4 > 0.0);
  CHECK(e3 / e4 == Approx(10.0).margin(2.0)); // first-order 1/N error
}
