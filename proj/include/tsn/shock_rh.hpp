#ifndef TSN_SHOCK_RH_HPP_
#define TSN_SHOCK_RH_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "tsn/background.hpp"
#include "tsn/gas.hpp"
#include "tsn/util.hpp"

namespace tsn {

// ---------------------------------------------------------------------------
// Nonlinear jump solve on the shock trace
// ---------------------------------------------------------------------------

/// Downstream radial velocity from Bernoulli at fixed flow-angle ratio
/// varpi = U2/U1 and swirl U3: U1 = sqrt((2(B-h) - U3^2)/(1+varpi^2)).
inline double u1_from_bernoulli(double P, double S, double B, double U3,
                                double varpi, const GasConstants& g) {
  double val = (2.0 * (B - enthalpy(P, S, g)) - U3 * U3) /
               (1.0 + varpi * varpi);
  if (!(val > 0.0))
    throw SolveError("u1_from_bernoulli: no positive radial velocity");
  return std::sqrt(val);
}

struct RHTraceResult {
  double P = 0.0, S = 0.0;
  double U1 = 0.0;  // downstream radial velocity from Bernoulli
  int iters = 0;
  double res1 = 0.0, res2 = 0.0;  // scaled terminal residuals
};

/// Solve the two reduced jump relations for the downstream (P,S) given the
/// upstream trace state, the downstream flow-angle ratio varpi, the swirl U3,
/// and the Bernoulli constant B (both continuous across the shock). Damped
/// Newton with a finite-difference Jacobian from the given initial guess.
inline RHTraceResult solve_rh_trace(const FlowState& up, double varpi,
                                    double U3, double B, const GasConstants& g,
                                    double P_init, double S_init) {
  const double m_up = density(up, g) * up.U1;
  const double mom_up = density(up, g) * up.U1 * up.U1 + up.P;
  const double w_up = up.U2 / up.U1;
  const double pw_up = up.P * up.U2 / up.U1;
  auto resid = [&](double P, double S, double* f1, double* f2) {
    double rho = density_from_PS(P, S, g);
    double U1 = u1_from_bernoulli(P, S, B, U3, varpi, g);
    double m_dn = rho * U1;
    double mom_dn = m_dn * U1 + P;
    double jr = (varpi * U1 - up.U2) / (P - up.P);
    double jw = varpi - w_up;
    double jpw = P * varpi - pw_up;
    *f1 = (m_dn - m_up) - m_dn * m_up * jr * jw;
    *f2 = (mom_dn - mom_up) - (-m_up * jr * jpw + mom_dn * m_up * jr * jw);
  };
  double P = P_init, S = S_init;
  double f1, f2;
  resid(P, S, &f1, &f2);
  const double s1 = std::max(std::abs(m_up), 1e-30);
  const double s2 = std::max(std::abs(mom_up), 1e-30);
  RHTraceResult out;
  for (int it = 0; it < 50; ++it) {
    double r0 = std::abs(f1 / s1) + std::abs(f2 / s2);
    if (r0 < 1e-12) {
      out.iters = it;
      break;
    }
    double hP = 1e-7 * std::max(std::abs(P), 1.0);
    double hS = 1e-7 * std::max(std::abs(S), 1.0);
    double a1, a2, b1, b2;
    resid(P + hP, S, &a1, &a2);
    resid(P, S + hS, &b1, &b2);
    double j11 = (a1 - f1) / hP, j12 = (b1 - f1) / hS;
    double j21 = (a2 - f2) / hP, j22 = (b2 - f2) / hS;
    double det = j11 * j22 - j12 * j21;
    if (det == 0.0) throw SolveError("solve_rh_trace: singular Jacobian");
    double dP = -(f1 * j22 - f2 * j12) / det;
    double dS = -(j11 * f2 - j21 * f1) / det;
    // damp if the full step grows the residual
    double lam = 1.0;
    for (int tries = 0; tries < 8; ++tries) {
      double Pn = P + lam * dP, Sn = S + lam * dS;
      double g1, g2;
      bool ok = true;
      try {
        resid(Pn, Sn, &g1, &g2);
      } catch (const SolveError&) {
        ok = false;
      } catch (const DomainError&) {
        ok = false;
      }
      if (ok && (std::abs(g1 / s1) + std::abs(g2 / s2) < r0 || lam < 0.2)) {
        P = Pn;
        S = Sn;
        f1 = g1;
        f2 = g2;
        break;
      }
      lam *= 0.5;
      if (tries == 7)
        throw SolveError("solve_rh_trace: line search failed");
    }
    out.iters = it + 1;
    if (it == 49)
      throw SolveError("solve_rh_trace: no convergence in 50 Newton steps");
  }
  if (std::abs(f1 / s1) + std::abs(f2 / s2) >= 1e-11)
    throw SolveError("solve_rh_trace: residual above tolerance");
  out.P = P;
  out.S = S;
  out.U1 = u1_from_bernoulli(P, S, B, U3, varpi, g);
  out.res1 = f1 / s1;
  out.res2 = f2 / s2;
  // downstream must be subsonic in total speed
  FlowState dn{out.U1, varpi * out.U1, U3, P, S};
  if (!(mach(dn, g) < 1.0))
    throw SolveError("solve_rh_trace: root on the supersonic branch");
  return out;
}

/// Convenience overload: initial guess from the plain normal shock of the
/// radial part of the upstream state.
inline RHTraceResult solve_rh_trace(const FlowState& up, double varpi,
                                    double U3, double B,
                                    const GasConstants& g) {
  FlowState radial{up.U1, 0.0, 0.0, up.P, up.S};
  FlowState guess = normal_shock(radial, g);
  return solve_rh_trace(up, varpi, U3, B, g, guess.P, guess.S);
}

// ---------------------------------------------------------------------------
// Linearized jump coefficients
// ---------------------------------------------------------------------------

struct LinearJumpCoefficients {
  double e1 = 0.0;  // dP/dpsi at the background shock
  double e2 = 0.0;  // dS/dpsi at the background shock
  double a = 0.0;   // shock-slope coefficient U_b+/(r_b (P_b+ - P_b-))
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
  double det = 0.0;   // det(a_ij)
  double cond = 0.0;  // rough 2x2 condition estimate
};

/// Taylor coefficients of the jump relations around the background shock.
/// (e1,e2) come from the 2x2 solve of the linearized system; the matrix
/// entries are the closed forms of the P/S partial derivatives.
inline LinearJumpCoefficients linear_jump_coefficients(
    const BackgroundSolution& bg) {
  const GasConstants& g = bg.gas;
  FlowState up = bg.sup(bg.r_b);
  FlowState dn = bg.sub(bg.r_b);
  double U = dn.U1, P = dn.P;
  double rho_p = density(dn, g);
  double c2 = g.gamma * P / rho_p;
  double Um = up.U1;
  double rho_m = density(up, g);

  LinearJumpCoefficients co;
  co.a11 = (U * U - c2) / (U * c2);
  co.a12 = -(U * U + c2 / (g.gamma - 1.0)) * P / (g.c_v * U * c2);
  co.a21 = (U * U - c2) / c2;
  co.a22 = -(U * U + 2.0 * c2 / (g.gamma - 1.0)) * P / (g.c_v * c2);
  co.det = co.a11 * co.a22 - co.a12 * co.a21;
  double mx = std::max({std::abs(co.a11), std::abs(co.a12), std::abs(co.a21),
                        std::abs(co.a22)});
  co.cond = mx * mx / std::abs(co.det);
  // right-hand sides of the linearized system per unit shock displacement
  double b1 = -2.0 * rho_m * Um / bg.r_b;
  double b2 = -2.0 * rho_m * Um * Um / bg.r_b;
  co.e1 = (b1 * co.a22 - b2 * co.a12) / co.det;
  co.e2 = (co.a11 * b2 - co.a21 * b1) / co.det;
  co.a = U / (bg.r_b * (P - up.P));
  return co;
}

// ---------------------------------------------------------------------------
// Shock-front slope
// ---------------------------------------------------------------------------

/// psi'(y2) = (2 y2 / sin(theta)) * (U2+ - U2-) / (psi (P+ - P-)); returns 0
/// at the axis; refuses to divide by a degenerate pressure jump.
inline double shock_ode_rhs(double y2, double theta, double psi, double U2p,
                            double U2m, double Pp, double Pm,
                            double jump_threshold) {
  if (!(std::abs(Pp - Pm) > jump_threshold))
    throw SolveError("shock_ode_rhs: degenerate pressure jump " +
                     fmt17(Pp - Pm));
  if (y2 == 0.0) return 0.0;
  return (2.0 * y2 / std::sin(theta)) * (U2p - U2m) / (psi * (Pp - Pm));
}

// ---------------------------------------------------------------------------
// Taylor remainders (operational: exact nonlinear minus retained linear part)
// ---------------------------------------------------------------------------

/// Trace values of the current iterate at z1=0 for one z2, plus the hat-chart
/// angle theta(0,z2).
struct TraceHatValues {
  double W1 = 0.0, W2 = 0.0, W4 = 0.0, W5 = 0.0;
  double W6 = 0.0;
  double theta = 0.0;
};

struct TraceRemainders {
  double R3 = 0.0;   // P remainder
  double R4 = 0.0;   // S remainder
  double R11 = 0.0;  // shock-slope remainder
  double P_exact = 0.0, S_exact = 0.0;
};

/// Evaluate R3, R4, R11 at one trace ordinate. `upstream` is the supersonic
/// state at (W6_diamond(z2), z2); the exact jump uses the hat flow-angle
/// ratio W2 and the upstream swirl/Bernoulli invariants.
inline TraceRemainders trace_remainders(const TraceHatValues& hat, double z2,
                                        const FlowState& upstream,
                                        const BackgroundSolution& bg,
                                        const LinearJumpCoefficients& co) {
  const GasConstants& g = bg.gas;
  FlowState dn_b = bg.sub(bg.r_b);
  double B_up = bernoulli(upstream, g);
  RHTraceResult rh =
      solve_rh_trace(upstream, hat.W2, upstream.U3, B_up, g, dn_b.P, dn_b.S);
  TraceRemainders out;
  out.P_exact = rh.P;
  out.S_exact = rh.S;
  out.R3 = rh.P - dn_b.P - co.e1 * hat.W6;
  out.R4 = rh.S - dn_b.S - co.e2 * hat.W6;
  if (z2 == 0.0) {
    out.R11 = 0.0;
    return out;
  }
  // exact slope from the hat-grid trace values (downstream state of the
  // current iterate, not the re-solved jump)
  double psi = bg.r_b + hat.W6;
  double U2p = (bg.sub(bg.r_b).U1 + hat.W1) * hat.W2;
  double Pp = dn_b.P + hat.W4;
  double thr = 1e-6 * dn_b.P;
  double slope = shock_ode_rhs(z2, hat.theta, psi, U2p, upstream.U2, Pp,
                               upstream.P, thr);
  double thb = background_theta(z2, bg.kappa_b());
  out.R11 = slope - co.a * (2.0 * z2 / std::sin(thb)) * hat.W2;
  return out;
}

/// Tail integrals on the cell-centered grid: out[j] = int_{s_j}^{M} f ds with
/// s_j = (j+1/2) hs (half of cell j plus all later cells; second order).
inline std::vector<double> tail_integral_cellcentered(
    const std::vector<double>& f, double hs) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  double acc = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    out[j] = 0.5 * hs * f[j] + acc;
    acc += hs * f[j];
  }
  return out;
}

}  // namespace tsn

#endif  // TSN_SHOCK_RH_HPP_
