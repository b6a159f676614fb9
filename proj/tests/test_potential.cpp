#include <catch2/catch_amalgamated.hpp>

#include <micromaser/micromaser.hpp>

#include <cmath>
#include <random>
#include <vector>

using Catch::Approx;
using namespace micromaser;
using potential::SaddleKind;

namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

MaserParams fig_params() {
  MaserParams p;
  p.a = 1.0;
  p.n_b = 0.15;
  p.Delta = 0.0;
  p.N = 100.0;
  return p;
}

// phi on the minimum sub-branch of branch k with theta(phi) = theta
double phi_of_theta_min(int k, double theta, const MaserParams &p) {
  auto [lo, hi] = potential::branch_domain(k, p.a, p.Delta);
  if (k >= 1) {
    // fold at tan(phi) = phi; minima lie above it
    auto fold = [](double phi) { return std::tan(phi) - phi; };
    lo = detail::bisect(fold, k * pi + 1e-6, k * pi + pi / 2.0 - 1e-6) + 1e-9;
  } else {
    lo += 1e-9;
  }
  hi -= 1e-9;
  auto g = [&](double phi) { return potential::theta_of_phi(phi, p.a) - theta; };
  return detail::bisect(g, lo, hi, 1e-14);
}

double branch_min_v0(int k, double theta, const MaserParams &p) {
  return potential::v0_on_branch(phi_of_theta_min(k, theta, p), k, p);
}

} // namespace

TEST_CASE("branch entry angle") {
  CHECK(potential::phi0(1.0, 0.0) == 0.0);
  CHECK(potential::phi0(1.0, 0.5) == Approx(pi / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(potential::phi0(0.6, 0.5), no_solution); // 0.5/sqrt(0.2) > 1
  CHECK_THROWS_AS(potential::phi0(0.5, 0.0), no_solution);
}

TEST_CASE("branch point assembly") {
  auto p = fig_params();

  SECTION("continuous threshold is the phi -> 0 limit") {
    const auto s = potential::branch_point(1e-6, p);
    CHECK(s.theta == Approx(1.0).margin(1e-9));
    CHECK(s.branch == 0);
    CHECK(s.kind == SaddleKind::minimum);
  }

  SECTION("quarter-turn point") {
    const auto s = potential::branch_point(pi / 2.0, p);
    CHECK(s.x == Approx(1.0).epsilon(1e-12));
    CHECK(s.curvature == Approx(1.0 / 1.15).epsilon(1e-12));
    p.Delta = 0.5;
    const auto sd = potential::branch_point(pi / 2.0, p);
    CHECK(sd.x == Approx(0.75).epsilon(1e-12));
  }

  SECTION("detuned threshold") {
    p.Delta = 0.5;
    const auto s = potential::branch_point(potential::phi0(p.a, p.Delta), p);
    CHECK(s.theta == Approx(1.047198).margin(1e-5));
    CHECK(s.x == Approx(0.0).margin(1e-12));
  }

  SECTION("rejects phi between branches") {
    p.Delta = 0.5;
    CHECK_THROWS_AS(potential::branch_point(0.3, p), invalid_parameter);
    CHECK_THROWS_AS(potential::branch_point(pi - 0.1, p), invalid_parameter);
  }
}

TEST_CASE("potential from its defining integral") {
  SECTION("empty integral") {
    CHECK(potential::v0_of_x(0.0, fig_params()) == 0.0);
  }

  SECTION("equilibrium pumping gives a linear ramp") {
    MaserParams p;
    p.n_b = 2.0;
    p.a = 0.4;
    p.theta = 3.7;
    p.Delta = 0.3;
    const double slope = std::log(1.5); // -ln(n_b/(1+n_b))
    for (double x : {0.3, 1.0})
      CHECK(potential::v0_of_x(x, p) == Approx(x * slope).epsilon(1e-9));
  }

  SECTION("matches a brute-force trapezoid") {
    MaserParams p = fig_params();
    p.theta = 2.0;
    const double x = 0.5;
    const std::size_t n = 1 << 20;
    const double h = x / static_cast<double>(n);
    double acc = 0.5 * (std::log(w(0.0, p)) + std::log(w(x, p)));
    for (std::size_t i = 1; i < n; ++i)
      acc += std::log(w(h * static_cast<double>(i), p));
    CHECK(potential::v0_of_x(x, p) == Approx(-acc * h).margin(1e-8));
  }
}

TEST_CASE("potential along the branches") {
  SECTION("vanishes at every branch entry point") {
    MaserParams p = fig_params();
    p.Delta = 0.5;
    for (int k : {0, 1, 2}) {
      const double phi = potential::phi0(p.a, p.Delta) + k * pi;
      CHECK(potential::v0_on_branch(phi, k, p) == Approx(0.0).margin(1e-9));
    }
  }

  SECTION("branch degeneracy at the first-order line") {
    MaserParams p = fig_params();
    const double theta = 6.661022;
    CHECK(branch_min_v0(0, theta, p) ==
          Approx(branch_min_v0(1, theta, p)).margin(1e-6));
  }

  SECTION("agrees with the x-space integral") {
    MaserParams p = fig_params();
    const double phi = 2.0;
    MaserParams pt = p;
    pt.theta = potential::theta_of_phi(phi, p.a);
    const double x = potential::x_of_phi(phi, p.a, p.Delta);
    CHECK(potential::v0_on_branch(phi, 0, p) ==
          Approx(potential::v0_of_x(x, pt)).margin(1e-8));
  }
}

TEST_CASE("potential derivative along minimum sub-branches") {
  MaserParams p = fig_params();

  SECTION("empty integral at the detuned entry point") {
    p.Delta = 0.5;
    const double phi = potential::phi0(p.a, p.Delta);
    CHECK(potential::dv0_dtheta(phi, 0, p) == Approx(0.0).margin(1e-12));
  }

  SECTION("rejects maximum sub-branches") {
    p.Delta = 0.5;
    const double phi = potential::phi0(p.a, p.Delta) + pi;
    CHECK_THROWS_AS(potential::dv0_dtheta(phi, 1, p), invalid_parameter);
  }

  SECTION("matches finite differences of the branch potential") {
    const double phi = 4.8;
    const double theta = potential::theta_of_phi(phi, p.a);
    const double h = 1e-3;
    const double fd =
        (branch_min_v0(1, theta + h, p) - branch_min_v0(1, theta - h, p)) /
        (2.0 * h);
    CHECK(potential::dv0_dtheta(phi, 1, p) == Approx(fd).epsilon(1e-6));
  }

  SECTION("one sign change per minimum sub-branch") {
    const double d46 = potential::dv0_dtheta(4.6, 1, p);
    const double d60 = potential::dv0_dtheta(6.0, 1, p);
    CHECK(d46 * d60 < 0.0);
    CHECK(d46 < 0.0); // branch drops right after it is born
  }
}

TEST_CASE("curvature formulas agree") {
  MaserParams p = fig_params();

  SECTION("quarter-turn value") {
    CHECK(potential::v0_second(pi / 2.0, p) ==
          Approx(1.0 / 1.15).epsilon(1e-12));
  }

  SECTION("flat at the fold") {
    const double fold = 4.493409457909064; // tan(phi) = phi
    CHECK(potential::v0_second(fold, p) == Approx(0.0).margin(1e-12));
  }

  SECTION("phi-form equals x-form at random branch points") {
    std::mt19937 rng(20260818);
    for (double Delta : {0.0, 0.5}) {
      p.Delta = Delta;
      int done = 0;
      while (done < 20) {
        const int k = static_cast<int>(rng() % 3);
        auto [lo, hi] = potential::branch_domain(k, p.a, Delta);
        std::uniform_real_distribution<double> u(lo + 1e-3, hi - 1e-3);
        const double phi = u(rng);
        const double x = potential::x_of_phi(phi, p.a, Delta);
        if (x < 1e-2) continue;
        MaserParams pt = p;
        pt.theta = potential::theta_of_phi(phi, p.a);
        CHECK(potential::v0_second(phi, p) ==
              Approx(potential::v0_second_x(x, pt)).epsilon(1e-9));
        ++done;
      }
    }
  }
}

TEST_CASE("saddle enumeration") {
  MaserParams p = fig_params();

  SECTION("empty below the continuous threshold") {
    p.theta = 0.5;
    CHECK(potential::enumerate_saddles(p).empty());
  }

  SECTION("second branch pair appears at its fold") {
    p.theta = 4.5; // below the first fold at 4.603
    auto s = potential::enumerate_saddles(p);
    REQUIRE(s.size() == 1);
    CHECK(s[0].branch == 0);
    CHECK(s[0].kind == SaddleKind::minimum);

    p.theta = 5.0;
    s = potential::enumerate_saddles(p);
    REQUIRE(s.size() == 3);
    int b0 = 0, b1min = 0, b1max = 0;
    for (const auto &sp : s) {
      if (sp.branch == 0) ++b0;
      if (sp.branch == 1)
        (sp.kind == SaddleKind::minimum ? b1min : b1max) += 1;
    }
    CHECK(b0 == 1);
    CHECK(b1min == 1);
    CHECK(b1max == 1);
  }

  SECTION("single detuned minimum just above threshold") {
    p.Delta = 0.5;
    p.theta = 1.2;
    const auto s = potential::enumerate_saddles(p);
    REQUIRE(s.size() == 1);
    CHECK(s[0].branch == 0);
    CHECK(s[0].kind == SaddleKind::minimum);
    CHECK(s[0].phi > potential::phi0(p.a, p.Delta));
  }

  SECTION("saddle identities on a parameter grid") {
    for (double theta : {1.2, 5.0, 7.0, 11.0, 17.0}) {
      for (double a : {0.75, 1.0}) {
        for (double Delta : {0.0, 0.5}) {
          MaserParams g;
          g.a = a;
          g.n_b = 0.15;
          g.Delta = Delta;
          g.theta = theta;
          const double C = 2.0 * a - 1.0;
          std::vector<potential::SaddlePoint> byphi =
              potential::enumerate_saddles(g);
          std::sort(byphi.begin(), byphi.end(),
                    [](const auto &l, const auto &r) { return l.phi < r.phi; });
          int prev_branch = -1;
          SaddleKind prev_kind = SaddleKind::minimum;
          for (const auto &s : byphi) {
            const double xd = s.x + Delta * Delta;
            // extremum condition, branch parametrization, energy bound
            CHECK(std::abs(C * std::pow(std::sin(theta * std::sqrt(xd)), 2) -
                           xd) < 1e-10);
            CHECK(xd == Approx(C * std::pow(std::sin(s.phi), 2)).margin(1e-12));
            CHECK(xd <= C + 1e-12);
            const bool min_disc =
                1.0 - s.phi * std::cos(s.phi) / std::sin(s.phi) > 0.0;
            CHECK((s.kind == SaddleKind::minimum) == min_disc);
            if (s.branch >= 1 && s.branch == prev_branch) {
              CHECK(prev_kind == SaddleKind::maximum);
              CHECK(s.kind == SaddleKind::minimum);
            }
            prev_branch = s.branch;
            prev_kind = s.kind;
          }
        }
      }
    }
  }
}

TEST_CASE("gaussian mixture approximation") {
  MaserParams p = fig_params();
  p.N = 1000.0;

  SECTION("single minimum takes all the weight") {
    p.theta = 3.0;
    const auto m = potential::gaussian_mixture(p);
    REQUIRE(m.components.size() == 1);
    CHECK(m.components[0].weight == Approx(1.0).epsilon(1e-14));
  }

  SECTION("two comparable components at the first-order line") {
    p.theta = 6.661022;
    const auto m = potential::gaussian_mixture(p);
    REQUIRE(m.components.size() == 2);
    double wsum = 0.0;
    for (const auto &c : m.components) wsum += c.weight;
    CHECK(wsum == Approx(1.0).margin(1e-10));
    CHECK(m.components[0].x == Approx(0.16685).margin(1e-3));
    CHECK(m.components[1].x == Approx(0.64521).margin(1e-3));
    const double ratio = m.components[1].weight / m.components[0].weight;
    CHECK(ratio > 1.0 / 3.0);
    CHECK(ratio < 3.0);
  }

  SECTION("mixture mean tracks the exact mean") {
    p.theta = 5.0;
    const auto m = potential::gaussian_mixture(p);
    const double exact = moments(stationary_distribution(p), p.N).x_mean;
    CHECK(m.mean() == Approx(exact).epsilon(0.01));
  }

  SECTION("centers are the potential minima") {
    p.theta = 7.0;
    const auto m = potential::gaussian_mixture(p);
    const auto saddles = potential::enumerate_saddles(p);
    for (const auto &c : m.components) {
      bool found = false;
      for (const auto &s : saddles)
        if (s.kind == SaddleKind::minimum && std::abs(s.x - c.x) < 1e-12)
          found = true;
      CHECK(found);
    }
  }

  SECTION("thermal phase has no mixture") {
    p.theta = 0.5;
    CHECK_THROWS_AS(potential::gaussian_mixture(p), no_solution);
    p.theta = 5.0;
    p.a = 0.3;
    CHECK_THROWS_AS(potential::gaussian_mixture(p), no_solution);
  }

  SECTION("total variation against the exact state stays small") {
    for (double theta : {5.0, 9.0, 14.0}) {
      p.theta = theta;
      const auto m = potential::gaussian_mixture(p);
      const auto d = stationary_distribution(p);
      double tv = 0.0;
      for (std::size_t n = 0; n < d.probs.size(); ++n) {
        const double pm =
            m.density(static_cast<double>(n) / p.N) / p.N;
        tv += std::abs(pm - d.probs[n]);
      }
      CHECK(0.5 * tv < 0.05);
    }
  }
}
