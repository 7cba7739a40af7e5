// Tests for the shock-trace jump machinery: the nonlinear two-equation jump
// solve, its consistency with the full five jump relations, the linearized
// coefficients against finite-difference Jacobians, the shock-slope formula,
// and the operational Taylor remainders.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "tsn/shock_rh.hpp"

using namespace tsn;

namespace {
GasConstants gas() { return {1.4, 1.0, 1.0}; }
Geometry geom() { return {1.0, 2.0, 0.5235987755982988}; }

FlowState default_inlet() {
  FlowState in;
  in.U1 = 2.0 * std::sqrt(1.4);
  in.P = 1.0;
  in.S = 0.0;
  return in;
}

BackgroundSolution bg_at(double rb) {
  GasConstants g = gas();
  Geometry gm = geom();
  FlowState in = default_inlet();
  return shoot_shock_position(exit_pressure_given_shock(rb, in, gm, g), in,
                              gm, g);
}
}  // namespace

TEST_CASE("solve_rh_trace is the identity on the background shock") {
  for (double rb : {1.2, 1.5, 1.8}) {
    BackgroundSolution bg = bg_at(rb);
    FlowState up = bg.sup(bg.r_b);
    FlowState dn = bg.sub(bg.r_b);
    RHTraceResult rh = solve_rh_trace(up, 0.0, 0.0, bg.B, bg.gas);
    REQUIRE(rh.P == Catch::Approx(dn.P).epsilon(1e-11));
    REQUIRE(rh.S == Catch::Approx(dn.S).margin(1e-11));
    REQUIRE(rh.U1 == Catch::Approx(dn.U1).epsilon(1e-10));
    // admissibility
    REQUIRE(rh.P > up.P);
    REQUIRE(rh.S > up.S);
  }
}

TEST_CASE("solved trace satisfies all five jump relations") {
  BackgroundSolution bg = bg_at(1.5);
  const GasConstants& g = bg.gas;
  // perturbed upstream trace state with swirl and flow angle
  double psi = bg.r_b + 0.01;
  FlowState up = bg.sup(psi);
  up.U2 = 0.05;
  up.U3 = 0.03;
  double B = bernoulli(up, g);
  double varpi = 0.02;
  RHTraceResult rh = solve_rh_trace(up, varpi, up.U3, B, g);

  FlowState dn{rh.U1, varpi * rh.U1, up.U3, rh.P, rh.S};
  double y2 = 0.3, th = 0.3;
  double psip = shock_ode_rhs(y2, th, psi, dn.U2, up.U2, dn.P, up.P, 1e-9);
  double rho_p = density(dn, g), rho_m = density(up, g);
  // first relation: mass-flux vs slope coupling
  double r1 = (2.0 * y2 / (psi * std::sin(th))) *
                  (1.0 / (rho_p * dn.U1) - 1.0 / (rho_m * up.U1)) +
              psip * (dn.U2 / dn.U1 - up.U2 / up.U1);
  // second relation: momentum coupling
  double r2 = (dn.U1 + dn.P / (rho_p * dn.U1)) -
              (up.U1 + up.P / (rho_m * up.U1)) +
              psip * (psi * std::sin(th) / (2.0 * y2)) *
                  (dn.P * dn.U2 / dn.U1 - up.P * up.U2 / up.U1);
  REQUIRE(std::abs(r1) < 1e-10);
  REQUIRE(std::abs(r2) < 1e-10);
  // fourth and fifth hold by construction
  REQUIRE(dn.U3 == up.U3);
  REQUIRE(bernoulli(dn, g) == Catch::Approx(B).epsilon(1e-12));
}

TEST_CASE("jump solve deviates from its linearization quadratically") {
  BackgroundSolution bg = bg_at(1.5);
  const GasConstants& g = bg.gas;
  LinearJumpCoefficients co = linear_jump_coefficients(bg);
  FlowState dn_b = bg.sub(bg.r_b);
  auto P_of = [&](double t) {
    double dpsi = 0.02 * t;
    FlowState up = bg.sup(bg.r_b + dpsi);
    double varpi = 0.03 * t;
    return solve_rh_trace(up, varpi, 0.0, bg.B, g).P;
  };
  auto dev = [&](double t) {
    return P_of(t) - dn_b.P - co.e1 * 0.02 * t;
  };
  double d1 = dev(1.0), d2 = dev(0.5), d4 = dev(0.25);
  REQUIRE(std::abs(d1) > 1e-8);  // the nonlinear part is visible
  REQUIRE(d1 / d2 == Catch::Approx(4.0).margin(0.7));
  REQUIRE(d2 / d4 == Catch::Approx(4.0).margin(0.4));
}

TEST_CASE("linear jump coefficients match finite-difference Jacobians") {
  for (double rb : {1.3, 1.6}) {
    BackgroundSolution bg = bg_at(rb);
    LinearJumpCoefficients co = linear_jump_coefficients(bg);
    REQUIRE(co.e2 > 0.0);
    REQUIRE(co.a > 0.0);
    REQUIRE(std::abs(co.det) > 1e-12);

    // closed form for e2 via the entropy-jump slope
    FlowState up = bg.sup(bg.r_b);
    FlowState dn = bg.sub(bg.r_b);
    const GasConstants& g = bg.gas;
    double e2_closed = 2.0 * (g.gamma - 1.0) * g.c_v * density(up, g) *
                       up.U1 * (up.U1 - dn.U1) / (bg.r_b * dn.P);
    REQUIRE(co.e2 == Catch::Approx(e2_closed).epsilon(1e-12));

    double h = 1e-5;
    auto jump = [&](double dpsi) {
      FlowState u = bg.sup(bg.r_b + dpsi);
      return solve_rh_trace(u, 0.0, 0.0, bg.B, g);
    };
    RHTraceResult p = jump(h), m = jump(-h);
    REQUIRE((p.P - m.P) / (2.0 * h) == Catch::Approx(co.e1).epsilon(1e-6));
    REQUIRE((p.S - m.S) / (2.0 * h) == Catch::Approx(co.e2).epsilon(1e-6));
  }
}

TEST_CASE("shock slope from the flow-angle perturbation matches coefficient a") {
  BackgroundSolution bg = bg_at(1.5);
  LinearJumpCoefficients co = linear_jump_coefficients(bg);
  FlowState up = bg.sup(bg.r_b);
  FlowState dn = bg.sub(bg.r_b);
  double z2 = 0.25;
  double thb = background_theta(z2, bg.kappa_b());
  double varpi = 1e-6;
  double slope = shock_ode_rhs(z2, thb, bg.r_b, dn.U1 * varpi, 0.0, dn.P,
                               up.P, 1e-9);
  REQUIRE(slope == Catch::Approx(co.a * (2.0 * z2 / std::sin(thb)) *
                                 varpi).epsilon(1e-9));
}

TEST_CASE("shock_ode_rhs special cases") {
  REQUIRE(shock_ode_rhs(0.3, 0.4, 1.5, 0.2, 0.2, 4.0, 1.0, 1e-9) == 0.0);
  REQUIRE(shock_ode_rhs(0.0, 0.4, 1.5, 0.3, 0.2, 4.0, 1.0, 1e-9) == 0.0);
  // manufactured: U2 jump delta*sin(theta_b)*y2 gives 2 delta y2^2/(psi [P])
  double delta = 0.07, y2 = 0.2, kb = 0.5, psi = 1.5, Pp = 4.0, Pm = 1.0;
  double thb = background_theta(y2, kb);
  double v = shock_ode_rhs(y2, thb, psi, delta * std::sin(thb) * y2, 0.0, Pp,
                           Pm, 1e-9);
  REQUIRE(v == Catch::Approx(2.0 * delta * y2 * y2 / (psi * (Pp - Pm)))
                  .epsilon(1e-13));
  REQUIRE_THROWS_AS(shock_ode_rhs(0.3, 0.4, 1.5, 0.3, 0.2, 1.0 + 1e-12, 1.0,
                                  1e-9),
                    SolveError);
}

TEST_CASE("remainders vanish at the background and scale quadratically") {
  BackgroundSolution bg = bg_at(1.5);
  LinearJumpCoefficients co = linear_jump_coefficients(bg);
  double z2 = 0.25;
  double thb = background_theta(z2, bg.kappa_b());

  TraceHatValues zero;
  zero.theta = thb;
  TraceRemainders r0 =
      trace_remainders(zero, z2, bg.sup(bg.r_b), bg, co);
  REQUIRE(std::abs(r0.R3) < 1e-9);
  REQUIRE(std::abs(r0.R4) < 1e-9);
  REQUIRE(std::abs(r0.R11) < 1e-12);

  auto rems = [&](double t) {
    TraceHatValues h;
    h.W6 = 0.02 * t;
    h.W2 = 0.03 * t;
    h.W1 = 0.01 * t;
    h.W4 = co.e1 * h.W6;
    h.W5 = co.e2 * h.W6;
    h.theta = thb;
    FlowState up = bg.sup(bg.r_b + h.W6);  // unperturbed upstream field
    return trace_remainders(h, z2, up, bg, co);
  };
  TraceRemainders ra = rems(1.0), rb_ = rems(0.5);
  REQUIRE(std::abs(ra.R3) > 1e-9);
  REQUIRE(ra.R3 / rb_.R3 == Catch::Approx(4.0).margin(0.8));
  REQUIRE(ra.R4 / rb_.R4 == Catch::Approx(4.0).margin(0.8));
  REQUIRE(ra.R11 / rb_.R11 == Catch::Approx(4.0).margin(0.8));
}

TEST_CASE("tail integrals on the cell-centered grid are second order") {
  int n = 200;
  double M = 0.9, hs = M / n;
  std::vector<double> f(n);
  for (int j = 0; j < n; ++j) {
    double s = (j + 0.5) * hs;
    f[j] = std::sin(2.0 * s);
  }
  auto tail = tail_integral_cellcentered(f, hs);
  for (int j : {0, 50, 120, 199}) {
    double s = (j + 0.5) * hs;
    double exact = 0.5 * (std::cos(2.0 * s) - std::cos(2.0 * M));
    REQUIRE(tail[j] == Catch::Approx(exact).margin(3e-5));
  }
}
