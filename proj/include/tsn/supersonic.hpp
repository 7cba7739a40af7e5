#ifndef TSN_SUPERSONIC_HPP_
#define TSN_SUPERSONIC_HPP_

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tsn/background.hpp"
#include "tsn/gas.hpp"
#include "tsn/util.hpp"

namespace tsn {

// ---------------------------------------------------------------------------
// Inlet data
// ---------------------------------------------------------------------------

/// Inlet perturbation profiles (functions of theta on [0,theta0]) and the
/// wall-shape profile f, a function of x = r - r1 with f(0)=f'(0)=0.
struct InletPerturbation {
  double epsilon = 0.0;
  Poly U1p, U2p, U3p, Pp, Sp;  // theta-profiles
  Poly f;                      // wall bump in x = r - r1
};

struct CompatCheck {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = true;
};

struct CompatReport {
  std::vector<CompatCheck> checks;
  bool pass = true;
};

/// Check the inlet compatibility identities by finite differences on the
/// supplied profiles (axis parity, wall corner condition, wall-shape flatness
/// at the inlet).
inline CompatReport validate_inlet(const InletPerturbation& pert,
                                   double theta0) {
  CompatReport rep;
  double h = 1e-5 * theta0;
  auto add = [&](const std::string& name, double res, double scale) {
    CompatCheck c;
    c.name = name;
    c.residual = res;
    c.tol = 1e-8 * std::max(1.0, scale);
    c.pass = std::abs(res) <= c.tol;
    rep.checks.push_back(c);
    rep.pass = rep.pass && c.pass;
  };
  auto d1 = [&](const Poly& p, double x) {
    return (p(x + h) - p(x - h)) / (2.0 * h);
  };
  auto d2 = [&](const Poly& p, double x) {
    return (p(x + h) - 2.0 * p(x) + p(x - h)) / (h * h);
  };
  double sc = 0.0;
  for (int j = 0; j <= 16; ++j) {
    double th = theta0 * j / 16.0;
    sc = std::max({sc, std::abs(pert.U1p(th)), std::abs(pert.U2p(th)),
                   std::abs(pert.U3p(th)), std::abs(pert.Pp(th)),
                   std::abs(pert.Sp(th))});
  }
  add("U2p(0)=0", pert.U2p(0.0), sc);
  add("U3p(0)=0", pert.U3p(0.0), sc);
  add("U2p''(0)=0", d2(pert.U2p, 0.0), sc / (theta0 * theta0));
  add("Pp'(0)=0", d1(pert.Pp, 0.0), sc / theta0);
  add("U3p'(0)=0", d1(pert.U3p, 0.0), sc / theta0);
  add("Sp'(0)=0", d1(pert.Sp, 0.0), sc / theta0);
  add("U2p(theta0)=0", pert.U2p(theta0), sc);
  add("Pp'(theta0)=U3p(theta0)^2*cot(theta0)",
      d1(pert.Pp, theta0) -
          pert.U3p(theta0) * pert.U3p(theta0) / std::tan(theta0),
      sc * std::max(1.0, sc) / theta0);
  add("f(0)=0", pert.f(0.0), 1.0);
  add("f'(0)=0", d1(pert.f, 0.0), 1.0);
  return rep;
}

// ---------------------------------------------------------------------------
// Marched supersonic field
// ---------------------------------------------------------------------------

namespace detail {
enum Comp { kU1 = 0, kU2, kU3, kP, kS };
using Slice = std::array<std::vector<double>, 5>;
// axis parity of each component under theta -> -theta within the
// compatibility class (U2 odd; the rest even with vanishing slope)
constexpr int kParity[5] = {+1, -1, +1, +1, +1};
}  // namespace detail

/// Discrete supersonic flow on the sheared grid sigma = theta*theta0/theta_w(r),
/// all marching levels retained.
class SupersonicField {
 public:
  GasConstants gas;
  Geometry geom;
  double epsilon = 0.0;
  Poly fwall;  // in x = r - r1
  int nsig = 0, nr = 0;
  std::vector<double> rs;
  std::vector<detail::Slice> levels;

  double hs() const { return geom.theta0 / double(nsig); }
  double sigma(int j) const { return double(j) * hs(); }

  /// wall factor w(r) = theta_w(r)/theta0
  double wfac(double r) const {
    return (geom.theta0 + epsilon * fwall(r - geom.r1)) / geom.theta0;
  }
  double dwfac(double r) const {
    return epsilon * fwall.deriv(r - geom.r1) / geom.theta0;
  }
  double wall_angle(double r) const { return geom.theta0 * wfac(r); }

  FlowState state_at(int lev, int j) const {
    const detail::Slice& q = levels[lev];
    return FlowState{q[0][j], q[1][j], q[2][j], q[3][j], q[4][j]};
  }

  /// Cubic r-interpolation of every component at every sigma node.
  detail::Slice slice_at_r(double r) const {
    detail::Slice out;
    double hr = rs[1] - rs[0];
    for (int c = 0; c < 5; ++c) {
      out[c].resize(nsig + 1);
      std::vector<double> col(levels.size());
      for (int j = 0; j <= nsig; ++j) {
        for (std::size_t l = 0; l < levels.size(); ++l) col[l] = levels[l][c][j];
        out[c][j] = cubic_uniform(col, rs[0], hr, r);
      }
    }
    return out;
  }

  /// Point sample at physical (r, theta); theta in [0, theta_w(r)].
  FlowState sample(double r, double theta) const {
    double sg = std::clamp(theta / wfac(r), 0.0, geom.theta0);
    detail::Slice sl = slice_at_r(r);
    FlowState st;
    st.U1 = cubic_uniform(sl[0], 0.0, hs(), sg);
    st.U2 = cubic_uniform(sl[1], 0.0, hs(), sg);
    st.U3 = cubic_uniform(sl[2], 0.0, hs(), sg);
    st.P = cubic_uniform(sl[3], 0.0, hs(), sg);
    st.S = cubic_uniform(sl[4], 0.0, hs(), sg);
    return st;
  }
};

namespace detail {

/// Biased sigma-derivative with axis parity ghosts; one-sided at the wall.
/// bias: -1 backward, 0 central, +1 forward.
inline double dsig(const std::vector<double>& q, int j, int n, double h,
                   int parity, int bias) {
  if (bias > 0) {
    if (j < n) return (q[j + 1] - q[j]) / h;
    return (q[n] - q[n - 1]) / h;
  }
  if (bias < 0) {
    if (j > 0) return (q[j] - q[j - 1]) / h;
    return (q[0] - double(parity) * q[1]) / h;
  }
  if (j == 0) return (q[1] - double(parity) * q[1]) / (2.0 * h);
  if (j == n) return (3.0 * q[n] - 4.0 * q[n - 1] + q[n - 2]) / (2.0 * h);
  return (q[j + 1] - q[j - 1]) / (2.0 * h);
}

/// Physical marching right-hand side dQ/dr at fixed sigma, including the
/// shear term from the wall-fitted coordinate.
inline Slice march_rhs(const Slice& q, double r, double w, double dw,
                       double theta0, int nsig, const GasConstants& g,
                       int bias) {
  Slice d;
  for (int c = 0; c < 5; ++c) d[c].assign(nsig + 1, 0.0);
  const double h = theta0 / double(nsig);
  for (int j = 0; j <= nsig; ++j) {
    double sg = double(j) * h;
    double th = sg * w;
    double U1 = q[kU1][j], U2 = q[kU2][j], U3 = q[kU3][j];
    double P = q[kP][j], S = q[kS][j];
    double rho = density_from_PS(P, S, g);
    double c2 = g.gamma * P / rho;
    // theta-derivatives via the sheared coordinate
    double dU1 = dsig(q[kU1], j, nsig, h, kParity[kU1], bias) / w;
    double dU2 = dsig(q[kU2], j, nsig, h, kParity[kU2], bias) / w;
    double dU3 = dsig(q[kU3], j, nsig, h, kParity[kU3], bias) / w;
    double dP = dsig(q[kP], j, nsig, h, kParity[kP], bias) / w;
    double dS = dsig(q[kS], j, nsig, h, kParity[kS], bias) / w;

    double div_theta;   // d_theta U2 + U2 cot(theta)
    double swirl_cot;   // U3^2 cot(theta)
    double u3_transport;  // d_theta U3 + U3 cot(theta)
    if (j == 0) {
      // axis limits within the compatibility class (U2 odd, U3 ~ theta^2)
      div_theta = 2.0 * dU2;
      swirl_cot = 0.0;
      u3_transport = 2.0 * dU3;
    } else {
      double ct = std::cos(th) / std::sin(th);
      div_theta = dU2 + U2 * ct;
      swirl_cot = U3 * U3 * ct;
      u3_transport = dU3 + U3 * ct;
    }

    double bracket = rho * (U2 * U2 + U3 * U3) / U1 - (rho * U2 / U1) * dU1 +
                     2.0 * rho * U1 + (U2 / c2) * dP + rho * div_theta;
    double dPr = -(U1 * c2 / (U1 * U1 - c2)) * bracket / r;
    double dU1r =
        (rho * (U2 * U2 + U3 * U3) / r - (rho * U2 / r) * dU1 - dPr) /
        (rho * U1);
    double dU2r = (-rho * U1 * U2 / r + rho * swirl_cot / r -
                   (rho * U2 / r) * dU2 - dP / r) /
                  (rho * U1);
    double dU3r = -U3 / r - (U2 / (r * U1)) * u3_transport;
    double dSr = -(U2 / (r * U1)) * dS;

    // shear correction: d/dr at fixed sigma adds (sigma w'/w) d_sigma
    double shear = sg * dw / w;
    d[kU1][j] = dU1r + shear * (dU1 * w);
    d[kU2][j] = dU2r + shear * (dU2 * w);
    d[kU3][j] = dU3r + shear * (dU3 * w);
    d[kP][j] = dPr + shear * (dP * w);
    d[kS][j] = dSr + shear * (dS * w);
  }
  return d;
}

}  // namespace detail

/// March the perturbed supersonic flow from the inlet to the exit with a
/// two-step predictor-corrector scheme, integrating the deviation from the
/// spherically symmetric profile so the unperturbed case is exact to roundoff.
inline SupersonicField march(const InletPerturbation& pert,
                             const BackgroundSolution& bg, int nsig, int nr,
                             double mach_margin = 0.05) {
  using namespace detail;
  if (nsig < 8 || nr < 8) throw DomainError("march: grid too coarse");
  CompatReport rep = validate_inlet(pert, bg.geom.theta0);
  if (!rep.pass) {
    std::string bad;
    for (const auto& c : rep.checks)
      if (!c.pass) bad += (bad.empty() ? "" : ", ") + c.name;
    throw DomainError("march: inlet compatibility failed: " + bad);
  }

  SupersonicField F;
  F.gas = bg.gas;
  F.geom = bg.geom;
  F.epsilon = pert.epsilon;
  F.fwall = pert.f;
  F.nsig = nsig;
  F.nr = nr;
  const double theta0 = bg.geom.theta0;
  const double h = theta0 / double(nsig);
  const double dr = (bg.geom.r2 - bg.geom.r1) / double(nr);
  const double eps = pert.epsilon;

  auto base_slice = [&](double r) {
    FlowState b = bg.sup(r);
    Slice s;
    s[kU1].assign(nsig + 1, b.U1);
    s[kU2].assign(nsig + 1, 0.0);
    s[kU3].assign(nsig + 1, 0.0);
    s[kP].assign(nsig + 1, b.P);
    s[kS].assign(nsig + 1, b.S);
    return s;
  };

  // deviation RHS: same discrete operator applied to state and base
  auto dev_rhs = [&](const Slice& wdev, double r, int bias) {
    Slice b = base_slice(r);
    Slice q = b;
    for (int c = 0; c < 5; ++c)
      for (int j = 0; j <= nsig; ++j) q[c][j] += wdev[c][j];
    double w = F.wfac(r), dw = F.dwfac(r);
    Slice dq = march_rhs(q, r, w, dw, theta0, nsig, bg.gas, bias);
    Slice db = march_rhs(b, r, w, dw, theta0, nsig, bg.gas, bias);
    for (int c = 0; c < 5; ++c)
      for (int j = 0; j <= nsig; ++j) dq[c][j] -= db[c][j];
    return dq;
  };

  auto enforce_bc = [&](Slice& wdev, double r) {
    // axis symmetry
    wdev[kU2][0] = 0.0;
    wdev[kU3][0] = 0.0;
    // wall slip: U2 = eps r f'(r-r1) U1 (base U2 is zero)
    double slope = eps * r * pert.f.deriv(r - bg.geom.r1);
    double U1w = bg.sup(r).U1 + wdev[kU1][nsig];
    wdev[kU2][nsig] = slope * U1w;
  };

  auto check_state = [&](const Slice& q, double r, int step) {
    double max_slope = 0.0;
    double w = F.wfac(r), dw = F.dwfac(r);
    for (int j = 0; j <= nsig; ++j) {
      FlowState st{q[kU1][j], q[kU2][j], q[kU3][j], q[kP][j], q[kS][j]};
      double M = mach(st, bg.gas);
      if (!(M > 1.0 + mach_margin))
        throw SolveError("march: supersonic breakdown (Mach=" + fmt17(M) +
                         ") at r=" + fmt17(r) + ", sigma node " +
                         std::to_string(j) + ", step " + std::to_string(step));
      double c = sound_speed(st, bg.gas);
      double U1 = st.U1, U2 = st.U2;
      double disc = std::max(U1 * U1 + U2 * U2 - c * c, 0.0);
      double lam = (std::abs(U1 * U2) + c * std::sqrt(disc)) /
                   (r * (U1 * U1 - c * c));
      // characteristic slope in sigma per unit r, plus the shear drift
      double slope = (std::abs(lam) + std::abs(double(j) * h * dw)) / w;
      max_slope = std::max(max_slope, slope);
    }
    if (dr * max_slope > 0.8 * h)
      throw SolveError("march: CFL violation at r=" + fmt17(r) +
                       " (need dr <= " + fmt17(0.8 * h / max_slope) + ")");
  };

  // inlet deviation (w(r1)=1, so sigma = theta at the inlet)
  Slice wdev;
  for (int c = 0; c < 5; ++c) wdev[c].assign(nsig + 1, 0.0);
  for (int j = 0; j <= nsig; ++j) {
    double th = double(j) * h;
    wdev[kU1][j] = eps * pert.U1p(th);
    wdev[kU2][j] = eps * pert.U2p(th);
    wdev[kU3][j] = eps * pert.U3p(th);
    wdev[kP][j] = eps * pert.Pp(th);
    wdev[kS][j] = eps * pert.Sp(th);
  }
  enforce_bc(wdev, bg.geom.r1);

  F.rs.resize(nr + 1);
  F.levels.resize(nr + 1);
  auto store = [&](int lev, double r, const Slice& wd) {
    Slice q = base_slice(r);
    for (int c = 0; c < 5; ++c)
      for (int j = 0; j <= nsig; ++j) q[c][j] += wd[c][j];
    F.rs[lev] = r;
    F.levels[lev] = q;
    check_state(q, r, lev);
  };
  store(0, bg.geom.r1, wdev);

  for (int lev = 0; lev < nr; ++lev) {
    double r = bg.geom.r1 + double(lev) * dr;
    int b1 = (lev % 2 == 0) ? +1 : -1;  // alternate the bias pair
    int b2 = -b1;
    Slice k1 = dev_rhs(wdev, r, b1);
    Slice wstar = wdev;
    for (int c = 0; c < 5; ++c)
      for (int j = 0; j <= nsig; ++j) wstar[c][j] += dr * k1[c][j];
    enforce_bc(wstar, r + dr);
    Slice k2 = dev_rhs(wstar, r + dr, b2);
    for (int c = 0; c < 5; ++c)
      for (int j = 0; j <= nsig; ++j)
        wdev[c][j] = 0.5 * (wdev[c][j] + wstar[c][j] + dr * k2[c][j]);
    enforce_bc(wdev, r + dr);
    store(lev + 1, r + dr, wdev);
  }
  return F;
}

/// Evaluate the marched field at chart coordinates (y1, y2): invert the
/// streamfunction at radius y1 and interpolate the sigma-slice.
inline FlowState evaluate_at_lagrangian(const SupersonicField& F, double y1,
                                        double y2) {
  using namespace detail;
  if (y1 < F.rs.front() - 1e-12 || y1 > F.rs.back() + 1e-12)
    throw DomainError("evaluate_at_lagrangian: radius outside field range");
  Slice sl = F.slice_at_r(y1);
  double w = F.wfac(y1);
  double h = F.hs();
  int n = F.nsig;
  std::vector<double> g(n + 1);
  for (int j = 0; j <= n; ++j) {
    double rho = density_from_PS(sl[kP][j], sl[kS][j], F.gas);
    g[j] = y1 * y1 * rho * sl[kU1][j] * std::sin(double(j) * h * w) * w;
  }
  std::vector<double> yt = cumsimpson_uniform(g, h);
  double target = y2 * y2;
  if (target > yt[n] * (1.0 + 1e-9))
    throw DomainError("evaluate_at_lagrangian: y2 outside the chart range");
  double sg = invert_monotone(yt, 0.0, h, std::min(target, yt[n]));
  FlowState st;
  st.U1 = cubic_uniform(sl[kU1], 0.0, h, sg);
  st.U2 = cubic_uniform(sl[kU2], 0.0, h, sg);
  st.U3 = cubic_uniform(sl[kU3], 0.0, h, sg);
  st.P = cubic_uniform(sl[kP], 0.0, h, sg);
  st.S = cubic_uniform(sl[kS], 0.0, h, sg);
  return st;
}

/// Interior residual of the five marched equations at a stored level, using
/// centered differences in r and sigma (diagnostic for refinement studies).
inline double interior_residual(const SupersonicField& F, int lev, int j) {
  using namespace detail;
  if (lev <= 0 || lev >= F.nr || j <= 0 || j >= F.nsig)
    throw DomainError("interior_residual: needs an interior point");
  double r = F.rs[lev];
  double drr = F.rs[1] - F.rs[0];
  Slice rhs = march_rhs(F.levels[lev], r, F.wfac(r), F.dwfac(r), F.geom.theta0,
                        F.nsig, F.gas, 0);
  double worst = 0.0;
  for (int c = 0; c < 5; ++c) {
    double dnum =
        (F.levels[lev + 1][c][j] - F.levels[lev - 1][c][j]) / (2.0 * drr);
    worst = std::max(worst, std::abs(dnum - rhs[c][j]));
  }
  return worst;
}

}  // namespace tsn

#endif  // TSN_SUPERSONIC_HPP_
