#ifndef TSN_BACKGROUND_HPP_
#define TSN_BACKGROUND_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "tsn/gas.hpp"
#include "tsn/util.hpp"

namespace tsn {

/// Divergent-nozzle geometry: r1 < r < r2, 0 <= theta <= theta0 (+ wall bump).
struct Geometry {
  double r1 = 1.0;
  double r2 = 2.0;
  double theta0 = 0.5235987755982988;  // pi/6

  void validate() const {
    if (!(r1 > 0.0 && r2 > r1)) throw DomainError("geometry: need 0 < r1 < r2");
    if (!(theta0 > 0.0 && theta0 < 1.5707963267948966))
      throw DomainError("geometry: need 0 < theta0 < pi/2");
  }
};

enum class Branch { supersonic, subsonic };

/// Critical (sonic) mass flux r^2 rho(c*) c* at radius r for invariants (B,S).
inline double critical_flux(double r, double B, double S,
                            const GasConstants& g) {
  double cs = critical_speed(B, g);
  return r * r * density_from_BSspeed(B, S, cs, g) * cs;
}

/// Solve the spherically symmetric radial state at radius r from the
/// invariants: r^2 rho U = m, B, S, on the requested Mach branch.
inline FlowState solve_radial_state(double r, double m, double B, double S,
                                    Branch branch, const GasConstants& g) {
  if (!(m > 0.0)) throw DomainError("solve_radial_state: mass flux must be > 0");
  double cs = critical_speed(B, g);
  double m_crit = critical_flux(r, B, S, g);
  if (m > m_crit * (1.0 + 1e-14))
    throw SolveError("solve_radial_state: flux " + fmt17(m) +
                     " exceeds critical flux " + fmt17(m_crit) +
                     " at r=" + fmt17(r));
  double Umax = std::sqrt(2.0 * B);
  auto q = [&](double U) {
    return r * r * U * density_from_BSspeed(B, S, U, g) - m;
  };
  auto dq = [&](double U) {
    double rho = density_from_BSspeed(B, S, U, g);
    double c2 = (g.gamma - 1.0) * (B - 0.5 * U * U);
    return r * r * rho * (1.0 - U * U / c2);
  };
  double lo, hi, guess;
  if (branch == Branch::supersonic) {
    lo = cs;
    hi = Umax * (1.0 - 1e-12);
    guess = std::min(1.2 * cs, 0.5 * (cs + hi));
  } else {
    lo = 0.0;
    hi = cs;
    guess = 0.8 * cs;
  }
  double U = newton_bracketed(q, dq, guess, lo, hi, 1e-15);
  FlowState st;
  st.U1 = U;
  double rho = density_from_BSspeed(B, S, U, g);
  st.P = pressure_from_rhoS(rho, S, g);
  st.S = S;
  return st;
}

/// Normal-shock jump (Prandtl relation U+ U- = c*^2); purely radial states.
inline FlowState normal_shock(const FlowState& up, const GasConstants& g) {
  double c = sound_speed(up, g);
  if (!(up.U1 > c))
    throw SolveError("normal_shock: upstream must be supersonic (M=" +
                     fmt17(up.U1 / c) + ")");
  double B = 0.5 * up.U1 * up.U1 + enthalpy(up.P, up.S, g);
  double cs2 = 2.0 * (g.gamma - 1.0) * B / (g.gamma + 1.0);
  double rho_m = density(up, g);
  FlowState dn;
  dn.U1 = cs2 / up.U1;
  double rho_p = rho_m * up.U1 / dn.U1;
  dn.P = up.P + rho_m * up.U1 * up.U1 - rho_p * dn.U1 * dn.U1;
  dn.S = entropy_from_Prho(dn.P, rho_p, g);
  return dn;
}

/// Analytic radial derivatives along a smooth branch (from the radial ODEs).
struct RadialDerivs {
  double dU = 0.0, dP = 0.0, drho = 0.0, dc2 = 0.0, d2P = 0.0;
};

inline RadialDerivs radial_derivatives(double r, const FlowState& st,
                                       const GasConstants& g) {
  RadialDerivs d;
  double rho = density(st, g);
  double c2 = g.gamma * st.P / rho;
  double U = st.U1;
  double D = c2 - U * U;  // negative on the supersonic branch
  d.dU = -2.0 * U * c2 / (r * D);
  d.dP = 2.0 * g.gamma * st.P * U * U / (r * D);
  d.drho = d.dP / c2;
  d.dc2 = -(g.gamma - 1.0) * U * d.dU;
  double dD = d.dc2 - 2.0 * U * d.dU;
  // differentiate dP = 2 gamma P U^2 / (r D)
  d.d2P = 2.0 * g.gamma * (d.dP * U * U + 2.0 * st.P * U * d.dU) / (r * D) -
          2.0 * g.gamma * st.P * U * U * (D + r * dD) / (r * r * D * D);
  return d;
}

/// Admissible exit-pressure bounds for the shooting problem.
struct ExitPressureRange {
  double P1 = 0.0;  // exit pressure when the shock sits at the exit
  double P2 = 0.0;  // exit pressure when the shock sits at the inlet
};

/// Spherically symmetric transonic shock solution.
struct BackgroundSolution {
  GasConstants gas;
  Geometry geom;
  double r_b = 0.0;      // shock radius
  double m = 0.0;        // mass flux r^2 rho U (per steradian)
  double B = 0.0;        // Bernoulli constant (both sides)
  double S_minus = 0.0;  // upstream entropy
  double S_plus = 0.0;   // downstream entropy
  ExitPressureRange range;

  FlowState sup(double r) const {
    return solve_radial_state(r, m, B, S_minus, Branch::supersonic, gas);
  }
  FlowState sub(double r) const {
    return solve_radial_state(r, m, B, S_plus, Branch::subsonic, gas);
  }
  RadialDerivs sup_derivs(double r) const {
    return radial_derivatives(r, sup(r), gas);
  }
  RadialDerivs sub_derivs(double r) const {
    return radial_derivatives(r, sub(r), gas);
  }
  /// kappa_b = 1/(y1^2 rho_b U_b), a constant on the subsonic branch.
  double kappa_b() const { return 1.0 / m; }
  double N() const { return geom.r2 - r_b; }
};

/// Exit pressure produced by a (hypothetical) shock at radius r_b.
inline double exit_pressure_given_shock(double r_b, const FlowState& inlet,
                                        const Geometry& geom,
                                        const GasConstants& g) {
  if (!(r_b > geom.r1 && r_b < geom.r2))
    throw DomainError("exit_pressure_given_shock: r_b outside (r1,r2)");
  double rho_in = density(inlet, g);
  if (!(inlet.U1 > sound_speed(inlet, g)))
    throw SolveError("exit_pressure_given_shock: inlet must be supersonic");
  double m = geom.r1 * geom.r1 * rho_in * inlet.U1;
  double B = bernoulli(inlet, g);
  FlowState up = solve_radial_state(r_b, m, B, inlet.S, Branch::supersonic, g);
  FlowState dn = normal_shock(up, g);
  FlowState exit_st =
      solve_radial_state(geom.r2, m, B, dn.S, Branch::subsonic, g);
  return exit_st.P;
}

/// Limiting exit pressures (open interval of admissibility).
inline ExitPressureRange exit_pressure_range(const FlowState& inlet,
                                             const Geometry& geom,
                                             const GasConstants& g) {
  ExitPressureRange er;
  double eps = 1e-11 * (geom.r2 - geom.r1);
  er.P1 = exit_pressure_given_shock(geom.r2 - eps, inlet, geom, g);
  er.P2 = exit_pressure_given_shock(geom.r1 + eps, inlet, geom, g);
  return er;
}

/// Locate the shock radius matching the prescribed exit pressure (bisection:
/// the exit pressure is strictly decreasing in r_b).
inline BackgroundSolution shoot_shock_position(double P_e,
                                               const FlowState& inlet,
                                               const Geometry& geom,
                                               const GasConstants& g,
                                               double tol = 1e-12) {
  geom.validate();
  g.validate();
  ExitPressureRange er = exit_pressure_range(inlet, geom, g);
  if (!(P_e > er.P1 && P_e < er.P2))
    throw DomainError("shoot_shock_position: P_e=" + fmt17(P_e) +
                      " outside the admissible open interval (" +
                      fmt17(er.P1) + ", " + fmt17(er.P2) + ")");
  double pad = 1e-11 * (geom.r2 - geom.r1);
  auto res = [&](double rb) {
    return exit_pressure_given_shock(rb, inlet, geom, g) - P_e;
  };
  double rb = bisect(res, geom.r1 + pad, geom.r2 - pad, tol);
  BackgroundSolution bg;
  bg.gas = g;
  bg.geom = geom;
  bg.r_b = rb;
  bg.m = geom.r1 * geom.r1 * density(inlet, g) * inlet.U1;
  bg.B = bernoulli(inlet, g);
  bg.S_minus = inlet.S;
  bg.S_plus = normal_shock(
                  solve_radial_state(rb, bg.m, bg.B, inlet.S,
                                     Branch::supersonic, g),
                  g)
                  .S;
  bg.range = er;
  return bg;
}

/// Background polar angle in the Lagrangian chart: theta_b = acos(1-kb z2^2).
inline double background_theta(double z2, double kappa_b) {
  double arg = 1.0 - kappa_b * z2 * z2;
  if (arg < -1.0 || arg > 1.0)
    throw DomainError("background_theta: argument outside [-1,1]");
  return std::acos(arg);
}

/// d1(z2) = sin(theta_b)/(2 z2) = sqrt(kb (2 - kb z2^2))/2, smooth at z2=0.
inline double chart_d1(double z2, double kappa_b) {
  return 0.5 * std::sqrt(kappa_b * (2.0 - kappa_b * z2 * z2));
}

/// d2(z2) = kb cos(theta_b)/(2 z2) (needs z2 > 0).
inline double chart_d2(double z2, double kappa_b) {
  return kappa_b * (1.0 - kappa_b * z2 * z2) / (2.0 * z2);
}

}  // namespace tsn

#endif  // TSN_BACKGROUND_HPP_
