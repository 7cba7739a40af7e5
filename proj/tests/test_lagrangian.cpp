// Tests for the streamline chart and extension machinery: reflection
// coefficients, C^2 seam matching, total flux quadrature, chart forward and
// inverse maps, and the angle-recovery integral.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "tsn/lagrangian.hpp"

using namespace tsn;

namespace {
// 5-point one-sided first/second derivatives (exact on quartics)
double d1_right(const std::function<double(double)>& f, double x, double h) {
  return (-25 * f(x) + 48 * f(x + h) - 36 * f(x + 2 * h) + 16 * f(x + 3 * h) -
          3 * f(x + 4 * h)) /
         (12 * h);
}
double d1_left(const std::function<double(double)>& f, double x, double h) {
  return -d1_right([&](double t) { return f(2 * x - t); }, x, h);
}
double d2_right(const std::function<double(double)>& f, double x, double h) {
  return (35 * f(x) - 104 * f(x + h) + 114 * f(x + 2 * h) -
          56 * f(x + 3 * h) + 11 * f(x + 4 * h)) /
         (12 * h * h);
}
double d2_left(const std::function<double(double)>& f, double x, double h) {
  return d2_right([&](double t) { return f(2 * x - t); }, x, h);
}
}  // namespace

TEST_CASE("extension coefficients are exactly (6, -32, 27)") {
  auto c = extension_coefficients();
  REQUIRE(c[0] == 6.0);
  REQUIRE(c[1] == -32.0);
  REQUIRE(c[2] == 27.0);
}

TEST_CASE("extension reproduces polynomials of degree <= 2 exactly") {
  double N = 0.7;
  int n = 32;
  auto make = [&](const std::function<double(double)>& p) {
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = p(N * i / double(n));
    return ExtendedField(w, N);
  };
  auto p2 = [](double z) { return 1.5 - 0.3 * z + 2.0 * z * z; };
  ExtendedField e = make(p2);
  for (double z = -N; z <= 2.0 * N; z += N / 17.0)
    REQUIRE(e(z) == Catch::Approx(p2(z)).margin(1e-12));
}

TEST_CASE("extension of z^3 is C^2 at both seams, not C^3") {
  double N = 0.7;
  int n = 40;
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) {
    double z = N * i / double(n);
    w[i] = z * z * z;
  }
  ExtendedField e(w, N);
  auto f = [&](double z) { return e(z); };
  double h = 0.01;
  for (double seam : {0.0, N}) {
    REQUIRE(std::abs(f(seam - 1e-13) - f(seam + 1e-13)) < 1e-10);
    REQUIRE(std::abs(d1_left(f, seam, h) - d1_right(f, seam, h)) < 1e-10);
    REQUIRE(std::abs(d2_left(f, seam, h) - d2_right(f, seam, h)) < 1e-9);
  }
  // interior third derivative is 6; exterior sum c_k/k^3 = 3 flips the sign:
  // d3 = -18 on z<0, so the extension is genuinely not C^3
  auto d3 = [&](double x) {
    return (d2_right(f, x + 1e-3, 1e-3) - d2_right(f, x, 1e-3)) / 1e-3;
  };
  REQUIRE(d3(0.05 * N) == Catch::Approx(6.0).margin(0.2));
  REQUIRE(std::abs(d3(-0.3 * N) - 6.0) > 10.0);
}

TEST_CASE("extension operator is linear") {
  double N = 1.0;
  int n = 24;
  std::vector<double> wa(n + 1), wb(n + 1), wc(n + 1);
  for (int i = 0; i <= n; ++i) {
    double z = N * i / double(n);
    wa[i] = std::sin(z);
    wb[i] = z * z;
    wc[i] = 2.0 * wa[i] - 3.0 * wb[i];
  }
  ExtendedField ea(wa, N), eb(wb, N), ec(wc, N);
  for (double z : {-0.8, -0.2, 0.4, 1.3, 1.9})
    REQUIRE(ec(z) == Catch::Approx(2.0 * ea(z) - 3.0 * eb(z)).margin(1e-13));
}

TEST_CASE("total_flux: constant integrand is exact, refinement is 4th order") {
  double theta0 = 0.5235987755982988, r1 = 1.0, k = 2.5;
  auto M_of = [&](int n) {
    std::vector<double> s(n + 1, k);
    return total_flux(s, theta0, r1);
  };
  double exact = std::sqrt(r1 * r1 * k * (1.0 - std::cos(theta0)));
  REQUIRE(M_of(64) == Catch::Approx(exact).epsilon(1e-9));

  // Richardson on a non-trivial integrand
  auto M_var = [&](int n) {
    std::vector<double> s(n + 1);
    for (int j = 0; j <= n; ++j) {
      double th = theta0 * j / double(n);
      s[j] = k * (1.0 + 0.2 * std::cos(3.0 * th));
    }
    double v = total_flux(s, theta0, r1);
    return v * v;
  };
  double ref = M_var(4096);
  double e1 = std::abs(M_var(32) - ref);
  double e2 = std::abs(M_var(64) - ref);
  REQUIRE(e1 / e2 > 12.0);
  REQUIRE(e1 / e2 < 22.0);
}

TEST_CASE("chart on the background flux recovers the closed form") {
  double theta0 = 0.5235987755982988;
  double m = 2.0;  // r^2 rho U constant
  auto rhoU1 = [&](double r, double) { return m / (r * r); };
  auto wall = [&](double) { return theta0; };
  LagrangianChart chart(rhoU1, wall, 1.4, 2.0, 24, 96);
  double kb = 1.0 / m;
  double Mex = std::sqrt(m * (1.0 - std::cos(theta0)));
  REQUIRE(chart.M() == Catch::Approx(Mex).epsilon(5e-8));
  REQUIRE(chart.jacobian_min() > 0.0);
  for (double r : {1.45, 1.7, 1.99}) {
    for (double th : {0.05, 0.2, 0.45}) {
      double y2ex = std::sqrt((1.0 - std::cos(th)) / kb);
      REQUIRE(chart.y2(r, th) == Catch::Approx(y2ex).epsilon(1e-6));
      REQUIRE(chart.theta(r, y2ex) == Catch::Approx(th).margin(1e-7));
    }
    // wall image is the total flux at every radius
    REQUIRE(chart.y2(r, theta0) == Catch::Approx(Mex).epsilon(5e-8));
  }
  REQUIRE(chart.y2(1.7, 0.0) == 0.0);
}

TEST_CASE("chart round trip on a perturbed field converges at O(h^2)") {
  double theta0 = 0.5235987755982988;
  auto rhoU1 = [&](double r, double th) {
    return (2.0 / (r * r)) * (1.0 + 0.1 * std::cos(4.0 * th) * (r - 1.4));
  };
  auto wall = [&](double r) { return theta0 * (1.0 + 0.01 * (r - 1.4)); };
  auto rt_err = [&](int n) {
    LagrangianChart chart(rhoU1, wall, 1.4, 2.0, n / 2, n);
    double worst = 0.0;
    for (double r : {1.5, 1.8})
      for (double th : {0.1, 0.3, 0.5}) {
        double y2 = chart.y2(r, th);
        worst = std::max(worst, std::abs(chart.theta(r, y2) - th));
      }
    return worst;
  };
  double e64 = rt_err(64), e128 = rt_err(128);
  REQUIRE(e64 < 1e-4);
  REQUIRE(e128 < e64);
}

TEST_CASE("theta_from_chart: background is exact, trivial cases hold") {
  double m = 2.0, y1 = 1.6;
  double kb = 1.0 / m;
  auto rhoU1_lag = [&](double) { return m / (y1 * y1); };
  for (double y2 : {0.2, 0.5, 0.8}) {
    double ex = std::acos(1.0 - kb * y2 * y2);
    REQUIRE(theta_from_chart(y1, y2, rhoU1_lag) ==
            Catch::Approx(ex).epsilon(1e-13));
  }
  REQUIRE(theta_from_chart(y1, 0.0, rhoU1_lag) == 0.0);
  auto tiny = [&](double) { return 1e-6; };
  REQUIRE_THROWS_AS(theta_from_chart(y1, 1.0, tiny), DomainError);
}

TEST_CASE("theta_from_chart agrees with the table inverse on a varied field") {
  double theta0 = 0.5235987755982988;
  auto rhoU1 = [&](double r, double th) {
    return (2.0 / (r * r)) * (1.0 + 0.05 * std::cos(3.0 * th));
  };
  auto wall = [&](double) { return theta0; };
  LagrangianChart chart(rhoU1, wall, 1.4, 2.0, 32, 256);
  double y1 = 1.62;
  for (double y2 : {0.15, 0.3, 0.45}) {  // strictly below the wall flux M
    // express rhoU1 along the radius in chart variables via the inverse table
    auto lagr = [&](double s) { return rhoU1(y1, chart.theta(y1, s)); };
    double th_q = theta_from_chart(y1, y2, lagr, 256);
    double th_t = chart.theta(y1, y2);
    REQUIRE(th_q == Catch::Approx(th_t).margin(5e-7));
  }
}

TEST_CASE("FixedDomain grid layout") {
  FixedDomain fd{0.6, 0.9, 6, 9};
  fd.validate();
  REQUIRE(fd.h1() == Catch::Approx(0.1));
  REQUIRE(fd.hs() == Catch::Approx(0.1));
  REQUIRE(fd.z1(0) == 0.0);
  REQUIRE(fd.z1(6) == Catch::Approx(0.6));
  REQUIRE(fd.s(0) == Catch::Approx(0.05));   // no node on the axis
  REQUIRE(fd.s(8) == Catch::Approx(0.85));
  REQUIRE_THROWS_AS((FixedDomain{-1, 1, 8, 8}).validate(), DomainError);
  REQUIRE_THROWS_AS((FixedDomain{1, 1, 2, 8}).validate(), DomainError);
}
