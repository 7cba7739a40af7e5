#ifndef TSN_HARNESS_HPP_
#define TSN_HARNESS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tsn/subsonic.hpp"

namespace tsn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV helpers (RFC 4180 quoting, '.' decimal separator, 17 significant digits)
// ---------------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += csv_field(cells[k]);
  }
  out += '\n';
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Case configuration
// ---------------------------------------------------------------------------

struct CaseConfig {
  GasConstants gas{1.4, 1.0, 1.0};
  Geometry geom{1.0, 2.0, 0.5235987755982988};
  FlowState inlet{2.0 * std::sqrt(1.4), 0.0, 0.0, 1.0, 0.0};
  double P_e = 0.0;  // exit pressure; <= 0 selects the mid-radius shock
  InletPerturbation pert;
  Poly P0;  // exit-pressure perturbation profile in theta
  int n1 = 64, n2 = 64;         // subsonic grid
  int nsig = 64, nr = 160;      // supersonic marching grid
  int nr_out = 128, ntheta_out = 128;  // Eulerian reconstruction grid
  int max_iter = 60;
  double tol = 0.0, delta = 0.0;  // 0: automatic
  bool straight_wall = false;
  int level = 1;  // diagnostics level for verify
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) return false;
    *out = v;
    return true;
  } catch (...) {
    return false;
  }
}

inline bool parse_int(const std::string& s, int* out) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) return false;
    *out = int(v);
    return true;
  } catch (...) {
    return false;
  }
}

inline bool parse_poly(const std::string& s, Poly* out) {
  std::vector<double> c;
  std::string tok;
  std::istringstream is(s);
  while (is >> tok) {
    for (char& ch : tok)
      if (ch == ',') ch = ' ';
    std::istringstream it(tok);
    std::string piece;
    while (it >> piece) {
      double v;
      if (!parse_double(piece, &v)) return false;
      c.push_back(v);
    }
  }
  *out = Poly(c);
  return true;
}

inline bool poly_is_zero(const Poly& p) {
  for (double c : p.coeffs())
    if (c != 0.0) return false;
  return true;
}

}  // namespace detail

/// Parse the INI-like configuration text. Collects every parse and
/// validation failure and throws a single ConfigError listing them all.
inline CaseConfig parse_config(const std::string& text) {
  CaseConfig cfg;
  std::vector<std::string> errs;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = raw;
    std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto err = [&](const std::string& msg) {
      errs.push_back("line " + std::to_string(lineno) + ": " + msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') {
        err("unterminated section header");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "gas" && section != "geometry" && section != "inlet" &&
          section != "perturbation" && section != "numerics")
        err("unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      err("expected key = value");
      continue;
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    auto num = [&](double* out) {
      if (!detail::parse_double(val, out)) err("bad number '" + val + "'");
    };
    auto inum = [&](int* out) {
      if (!detail::parse_int(val, out)) err("bad integer '" + val + "'");
    };
    auto poly = [&](Poly* out) {
      if (!detail::parse_poly(val, out))
        err("bad coefficient list '" + val + "'");
    };
    auto flag = [&](bool* out) {
      if (val == "true" || val == "1") *out = true;
      else if (val == "false" || val == "0") *out = false;
      else err("bad boolean '" + val + "'");
    };
    if (section == "gas") {
      if (key == "gamma") num(&cfg.gas.gamma);
      else if (key == "c_v") num(&cfg.gas.c_v);
      else if (key == "A") num(&cfg.gas.A);
      else err("unknown key '" + key + "' in [gas]");
    } else if (section == "geometry") {
      if (key == "r1") num(&cfg.geom.r1);
      else if (key == "r2") num(&cfg.geom.r2);
      else if (key == "theta0") num(&cfg.geom.theta0);
      else err("unknown key '" + key + "' in [geometry]");
    } else if (section == "inlet") {
      if (key == "U1") num(&cfg.inlet.U1);
      else if (key == "P") num(&cfg.inlet.P);
      else if (key == "S") num(&cfg.inlet.S);
      else if (key == "P_e") num(&cfg.P_e);
      else err("unknown key '" + key + "' in [inlet]");
    } else if (section == "perturbation") {
      if (key == "epsilon") num(&cfg.pert.epsilon);
      else if (key == "U1p") poly(&cfg.pert.U1p);
      else if (key == "U2p") poly(&cfg.pert.U2p);
      else if (key == "U3p") poly(&cfg.pert.U3p);
      else if (key == "Pp") poly(&cfg.pert.Pp);
      else if (key == "Sp") poly(&cfg.pert.Sp);
      else if (key == "f") poly(&cfg.pert.f);
      else if (key == "P0") poly(&cfg.P0);
      else if (key == "straight_wall") flag(&cfg.straight_wall);
      else err("unknown key '" + key + "' in [perturbation]");
    } else if (section == "numerics") {
      if (key == "n1") inum(&cfg.n1);
      else if (key == "n2") inum(&cfg.n2);
      else if (key == "nsig") inum(&cfg.nsig);
      else if (key == "nr") inum(&cfg.nr);
      else if (key == "nr_out") inum(&cfg.nr_out);
      else if (key == "ntheta_out") inum(&cfg.ntheta_out);
      else if (key == "max_iter") inum(&cfg.max_iter);
      else if (key == "tol") num(&cfg.tol);
      else if (key == "delta") num(&cfg.delta);
      else if (key == "level") inum(&cfg.level);
      else err("unknown key '" + key + "' in [numerics]");
    } else {
      err("key '" + key + "' outside any known section");
    }
  }

  // validation: collect all invariant violations together
  auto bad = [&](const std::string& msg) { errs.push_back(msg); };
  bool gas_ok = cfg.gas.gamma > 1.0 && cfg.gas.c_v > 0.0 && cfg.gas.A > 0.0;
  if (!gas_ok) bad("[gas] requires gamma > 1, c_v > 0, A > 0");
  bool geom_ok = cfg.geom.r1 > 0.0 && cfg.geom.r2 > cfg.geom.r1 &&
                 cfg.geom.theta0 > 0.0 &&
                 cfg.geom.theta0 < 1.5707963267948966;
  if (!geom_ok) bad("[geometry] requires 0 < r1 < r2 and 0 < theta0 < pi/2");
  bool inlet_ok = cfg.inlet.P > 0.0 && cfg.inlet.U1 > 0.0;
  if (!inlet_ok) bad("[inlet] requires U1 > 0 and P > 0");
  if (gas_ok && inlet_ok && !(mach(cfg.inlet, cfg.gas) > 1.0))
    bad("[inlet] must be supersonic (Mach = " +
        fmt17(mach(cfg.inlet, cfg.gas)) + ")");
  if (!(cfg.pert.epsilon >= 0.0)) bad("[perturbation] requires epsilon >= 0");
  if (cfg.straight_wall && !detail::poly_is_zero(cfg.pert.f))
    bad("[perturbation] straight_wall requires f to be zero");
  if (cfg.n1 < 8 || cfg.n2 < 8) bad("[numerics] requires n1, n2 >= 8");
  if (cfg.nsig < 8 || cfg.nr < 8) bad("[numerics] requires nsig, nr >= 8");
  if (cfg.nr_out < 4 || cfg.ntheta_out < 4)
    bad("[numerics] requires nr_out, ntheta_out >= 4");
  if (cfg.max_iter < 1) bad("[numerics] requires max_iter >= 1");
  if (cfg.tol < 0.0 || cfg.delta < 0.0)
    bad("[numerics] requires tol, delta >= 0");
  // exit pressure admissibility against the computed shooting range
  if (gas_ok && geom_ok && inlet_ok && mach(cfg.inlet, cfg.gas) > 1.0 &&
      cfg.P_e > 0.0) {
    try {
      ExitPressureRange er = exit_pressure_range(cfg.inlet, cfg.geom, cfg.gas);
      if (!(cfg.P_e > er.P1 && cfg.P_e < er.P2))
        bad("[inlet] P_e = " + fmt17(cfg.P_e) +
            " outside the admissible exit-pressure interval (" +
            fmt17(er.P1) + ", " + fmt17(er.P2) + ")");
    } catch (const std::exception& e) {
      bad(std::string("exit-pressure range computation failed: ") + e.what());
    }
  }
  if (!errs.empty()) {
    std::string msg = "configuration invalid:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline CaseConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

struct SolutionBundle {
  CaseConfig cfg;  // with the resolved exit pressure
  BackgroundSolution bg;
  SupersonicField sup;
  FixedDomain fd;
  PerturbationState W;
  IterationReport rep;
  Grid2 theta;      // chart angle of the converged state
  TraceData trace;  // trace data of the converged state
  double runtime_s = 0.0;
};

inline SolutionBundle run_case(const CaseConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  SolutionBundle b;
  b.cfg = cfg;
  double Pe = cfg.P_e;
  if (!(Pe > 0.0))
    Pe = exit_pressure_given_shock(0.5 * (cfg.geom.r1 + cfg.geom.r2),
                                   cfg.inlet, cfg.geom, cfg.gas);
  b.cfg.P_e = Pe;
  b.bg = shoot_shock_position(Pe, cfg.inlet, cfg.geom, cfg.gas);
  b.sup = march(cfg.pert, b.bg, cfg.nsig, cfg.nr);
  b.fd = make_fixed_domain(b.bg, b.sup, cfg.n1, cfg.n2);
  SubsonicIteration it(b.bg, b.sup, cfg.pert, cfg.P0, b.fd);
  SubsonicOptions so;
  so.max_iter = cfg.max_iter;
  so.tol = cfg.tol;
  so.delta = cfg.delta;
  auto [W, rep] = fixed_point_iterate(it, cfg.pert.epsilon, so);
  b.W = std::move(W);
  b.rep = std::move(rep);
  IterationData d = it.compute_data(b.W);
  b.theta = std::move(d.theta);
  b.trace = std::move(d.trace);
  b.runtime_s = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return b;
}

// ---------------------------------------------------------------------------
// Shock curve and Eulerian reconstruction
// ---------------------------------------------------------------------------

/// Shock front xi(theta): cell-centered samples (theta(0,s_j), r_b + W6(s_j))
/// plus the wall endpoint, evaluated by monotone piecewise-linear
/// interpolation with an even reflection across the axis.
struct ShockCurve {
  std::vector<double> th, xi;  // includes the wall endpoint as the last entry
  double theta_wall = 0.0;

  double at(double theta) const {
    double t = std::clamp(std::abs(theta), 0.0, th.back());
    auto it = std::upper_bound(th.begin(), th.end(), t);
    std::size_t hi = std::min(std::size_t(it - th.begin()), th.size() - 1);
    if (hi == 0) return xi[0];
    std::size_t lo = hi - 1;
    double u = (t - th[lo]) / (th[hi] - th[lo]);
    return xi[lo] * (1.0 - u) + xi[hi] * u;
  }

  /// One-sided second-order derivative at the wall from the last 3 samples.
  double wall_slope() const {
    std::size_t n = th.size();
    double h1 = th[n - 1] - th[n - 2], h2 = th[n - 2] - th[n - 3];
    double d1 = (xi[n - 1] - xi[n - 2]) / h1;
    double d2 = (xi[n - 2] - xi[n - 3]) / h2;
    return d1 + (d1 - d2) * h1 / (h1 + h2);
  }
};

inline ShockCurve shock_curve(const SolutionBundle& b) {
  const int n2 = b.fd.n2;
  ShockCurve c;
  c.th.resize(n2 + 1);
  c.xi.resize(n2 + 1);
  for (int j = 0; j < n2; ++j) {
    c.th[j] = b.theta[0][j];
    c.xi[j] = b.bg.r_b + b.W.W6[j];
  }
  // wall endpoint: linear extrapolation of the angle over the last half cell
  c.th[n2] = b.theta[0][n2 - 1] +
             0.5 * (b.theta[0][n2 - 1] - b.theta[0][n2 - 2]);
  c.xi[n2] = b.bg.r_b + b.W.W6M;
  c.theta_wall = c.th[n2];
  return c;
}

namespace detail {

/// Bilinear interpolation on the subsonic chart grid: vertex nodes in z1,
/// cell centers in z2 with an axis parity ghost (parity = +1 even, -1 odd)
/// and linear extrapolation over the last half cell at the wall.
inline double interp_chart(const Grid2& w, const FixedDomain& fd, double z1,
                           double z2, int parity) {
  const int n1 = fd.n1, n2 = fd.n2;
  const double h1 = fd.h1(), hs = fd.hs();
  double t = std::clamp(z1 / h1, 0.0, double(n1));
  int i0 = std::min(int(t), n1 - 1);
  double a = t - double(i0);
  auto row = [&](int i) {
    double u = z2 / hs - 0.5;
    if (u <= 0.0) {
      // between the axis ghost (parity * w[i][0] at -hs/2) and cell 0
      double g = double(parity) * w[i][0];
      double v = std::clamp((u + 1.0), 0.0, 1.0);
      return g * (1.0 - v) + w[i][0] * v;
    }
    if (u >= double(n2 - 1))
      return w[i][n2 - 1] +
             (u - double(n2 - 1)) * (w[i][n2 - 1] - w[i][n2 - 2]);
    int j0 = int(u);
    double v = u - double(j0);
    return w[i][j0] * (1.0 - v) + w[i][j0 + 1] * v;
  };
  return row(i0) * (1.0 - a) + row(i0 + 1) * a;
}

/// Cell-centered profile interpolation in z2 with an even axis ghost and a
/// prescribed wall endpoint value at z2 = M.
inline double interp_profile(const std::vector<double>& f, double wall_value,
                             double hs, double z2) {
  const int n2 = int(f.size());
  double u = z2 / hs - 0.5;
  if (u <= 0.0) return f[0];
  if (u >= double(n2 - 1)) {
    double v = std::clamp((u - double(n2 - 1)) * 2.0, 0.0, 1.0);
    return f[n2 - 1] * (1.0 - v) + wall_value * v;
  }
  int j0 = int(u);
  double v = u - double(j0);
  return f[j0] * (1.0 - v) + f[j0 + 1] * v;
}

}  // namespace detail

/// Evaluate the converged subsonic state at physical polar coordinates
/// (r, theta) with r >= xi(theta), by inverting the shock-fitted chart.
inline FlowState subsonic_state_at(const SolutionBundle& b, double r,
                                   double theta) {
  const FixedDomain& fd = b.fd;
  const double N = fd.N, hs = fd.hs(), rb = b.bg.r_b;
  auto z1_of = [&](double z2) {
    double w6 = detail::interp_profile(b.W.W6, b.W.W6M, hs, z2);
    return std::clamp((r - rb - w6) * N / (N - w6), 0.0, N);
  };
  auto ang = [&](double z2) {
    return detail::interp_chart(b.theta, fd, z1_of(z2), z2, -1);
  };
  // theta is increasing in z2 along a fixed radius: bisect
  double lo = 0.0, hi = fd.M;
  if (theta <= 0.0) {
    hi = 0.0;
  } else if (ang(fd.M) <= theta) {
    lo = fd.M;
  } else {
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      if (ang(mid) < theta) lo = mid;
      else hi = mid;
    }
  }
  double z2 = 0.5 * (lo + hi);
  double z1 = z1_of(z2);
  double r_eff = rb + z1;  // background radius of the chart node
  FlowState base = b.bg.sub(r_eff);
  FlowState st;
  st.U1 = base.U1 + detail::interp_chart(b.W.W1, fd, z1, z2, +1);
  st.U2 = st.U1 * detail::interp_chart(b.W.W2, fd, z1, z2, -1);
  st.U3 = detail::interp_chart(b.W.W3, fd, z1, z2, +1);
  st.P = base.P + detail::interp_chart(b.W.W4, fd, z1, z2, +1);
  st.S = b.bg.S_plus + detail::interp_chart(b.W.W5, fd, z1, z2, +1);
  return st;
}

/// Eulerian fields on a regular (r, theta) grid; region 0 = supersonic
/// (upstream of the shock), 1 = subsonic (downstream).
struct EulerianField {
  std::vector<double> r, th;
  Grid2 U1, U2, U3, P, S, Mach;
  std::vector<std::vector<int>> region;
  ShockCurve shock;
};

inline EulerianField reconstruct_eulerian(const SolutionBundle& b) {
  const int nr = b.cfg.nr_out, nt = b.cfg.ntheta_out;
  EulerianField e;
  e.shock = shock_curve(b);
  e.r.resize(nr + 1);
  e.th.resize(nt + 1);
  for (int i = 0; i <= nr; ++i)
    e.r[i] = b.bg.geom.r1 +
             (b.bg.geom.r2 - b.bg.geom.r1) * double(i) / double(nr);
  for (int j = 0; j <= nt; ++j)
    e.th[j] = b.bg.geom.theta0 * double(j) / double(nt);
  auto grid = [&]() {
    return Grid2(std::size_t(nr) + 1,
                 std::vector<double>(std::size_t(nt) + 1, 0.0));
  };
  e.U1 = grid();
  e.U2 = grid();
  e.U3 = grid();
  e.P = grid();
  e.S = grid();
  e.Mach = grid();
  e.region.assign(std::size_t(nr) + 1, std::vector<int>(nt + 1, 0));
  const double hsig = b.sup.hs();
  for (int i = 0; i <= nr; ++i) {
    double r = e.r[i];
    // one radial gather of the marched field serves the whole theta row
    detail::Slice sl = b.sup.slice_at_r(std::clamp(
        r, b.sup.rs.front(), b.sup.rs.back()));
    double w = b.sup.wfac(r);
    for (int j = 0; j <= nt; ++j) {
      double th = e.th[j];
      FlowState st;
      if (r < e.shock.at(th)) {
        double sg = std::clamp(th / w, 0.0, b.bg.geom.theta0);
        st.U1 = cubic_uniform(sl[0], 0.0, hsig, sg);
        st.U2 = cubic_uniform(sl[1], 0.0, hsig, sg);
        st.U3 = cubic_uniform(sl[2], 0.0, hsig, sg);
        st.P = cubic_uniform(sl[3], 0.0, hsig, sg);
        st.S = cubic_uniform(sl[4], 0.0, hsig, sg);
        e.region[i][j] = 0;
      } else {
        st = subsonic_state_at(b, r, th);
        e.region[i][j] = 1;
      }
      e.U1[i][j] = st.U1;
      e.U2[i][j] = st.U2;
      e.U3[i][j] = st.U3;
      e.P[i][j] = st.P;
      e.S[i][j] = st.S;
      e.Mach[i][j] = mach(st, b.bg.gas);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

namespace detail {

/// Downstream trace state of the iterate at shock cell j.
inline FlowState downstream_trace_state(const SolutionBundle& b, int j) {
  FlowState dn;
  FlowState base = b.bg.sub(b.bg.r_b);
  dn.U1 = base.U1 + b.W.W1[0][j];
  dn.U2 = dn.U1 * b.W.W2[0][j];
  dn.U3 = b.W.W3[0][j];
  dn.P = base.P + b.W.W4[0][j];
  dn.S = b.bg.S_plus + b.W.W5[0][j];
  return dn;
}

}  // namespace detail

/// Sup-norm residual of the jump conditions along the converged shock:
/// the two reduced mass/momentum relations with the finite-difference shock
/// slope, plus the swirl and Bernoulli continuity defects (all scaled).
inline double shock_rh_residual(const SolutionBundle& b) {
  const GasConstants& g = b.bg.gas;
  const int n2 = b.fd.n2;
  const double hs = b.fd.hs();
  std::vector<double> psi(n2);
  for (int j = 0; j < n2; ++j) psi[j] = b.bg.r_b + b.W.W6[j];
  std::vector<double> dpsi = detail::d2profile(psi, hs);
  // third-order one-sided slopes at the last two cells (the second-order
  // stencils there would otherwise dominate the sup residual)
  if (n2 >= 4)
    for (int j : {n2 - 2, n2 - 1})
      dpsi[j] = (11.0 * psi[j] - 18.0 * psi[j - 1] + 9.0 * psi[j - 2] -
                 2.0 * psi[j - 3]) /
                (6.0 * hs);
  // d psi / d theta = (d psi / d z2) / (d theta / d z2)
  double worst = 0.0;
  for (int j = 0; j < n2; ++j) {
    double s = b.fd.s(j);
    double th = b.theta[0][j];
    FlowState up = b.trace.up[j];
    FlowState dn = detail::downstream_trace_state(b, j);
    double rho_p = density(dn, g), rho_m = density(up, g);
    double psip = dpsi[j];
    double r1 = (2.0 * s / (psi[j] * std::sin(th))) *
                    (1.0 / (rho_p * dn.U1) - 1.0 / (rho_m * up.U1)) +
                psip * (dn.U2 / dn.U1 - up.U2 / up.U1);
    double r2 = (dn.U1 + dn.P / (rho_p * dn.U1)) -
                (up.U1 + up.P / (rho_m * up.U1)) +
                psip * (psi[j] * std::sin(th) / (2.0 * s)) *
                    (dn.P * dn.U2 / dn.U1 - up.P * up.U2 / up.U1);
    double r3 = (dn.U3 - up.U3) / std::max(1.0, std::abs(up.U1));
    double r4 = (bernoulli(dn, g) - b.trace.B[j]) / b.trace.B[j];
    worst = std::max({worst, std::abs(r1) / std::max(1.0, up.U1),
                      std::abs(r2) / std::max(1.0, up.U1), std::abs(r3),
                      std::abs(r4)});
  }
  return worst;
}

/// Named diagnostic checks on a solution bundle. Report-only: the JSON lists
/// every check with its measured value and tolerance.
inline json verify(const SolutionBundle& b, int level = 1) {
  const GasConstants& g = b.bg.gas;
  const FixedDomain& fd = b.fd;
  const int n1 = fd.n1, n2 = fd.n2;
  const double h1 = fd.h1(), hs = fd.hs();
  const double eps = b.cfg.pert.epsilon;
  const double eps_floor = eps + 1e-12;
  std::vector<VerifyCheck> checks;
  auto add = [&](const std::string& name, double value, double tol,
                 bool pass) {
    checks.push_back({name, value, tol, pass});
  };
  auto add_le = [&](const std::string& name, double value, double tol) {
    add(name, value, tol, std::abs(value) <= tol);
  };

  // jump-condition residuals and admissibility along the shock
  add_le("rh_residual", shock_rh_residual(b),
         10.0 * eps_floor * (hs + h1) + 1e-10);
  double minP = 1e300, minS = 1e300;
  for (int j = 0; j < n2; ++j) {
    FlowState dn = detail::downstream_trace_state(b, j);
    minP = std::min(minP, dn.P - b.trace.up[j].P);
    minS = std::min(minS, dn.S - b.trace.up[j].S);
  }
  add("pressure_condition", minP, 0.0, minP > 0.0);
  add("entropy_condition", minS, 0.0, minS > 0.0);

  // streamline invariance of the Bernoulli function, entropy, and swirl
  double bern = 0.0, entr = 0.0, swirl = 0.0, swirl_scale = 0.0;
  for (int j = 0; j < n2; ++j) {
    double ref = 0.0;
    for (int i = 0; i <= n1; ++i) {
      double r_eff = b.bg.r_b + fd.z1(i);
      FlowState base = b.bg.sub(r_eff);
      FlowState st;
      st.U1 = base.U1 + b.W.W1[i][j];
      st.U2 = st.U1 * b.W.W2[i][j];
      st.U3 = b.W.W3[i][j];
      st.P = base.P + b.W.W4[i][j];
      st.S = b.bg.S_plus + b.W.W5[i][j];
      bern = std::max(bern, std::abs(bernoulli(st, g) - b.trace.B[j]) /
                                b.trace.B[j]);
      entr = std::max(entr, std::abs(b.W.W5[i][j] - b.W.W5[0][j]));
      double z1 = fd.z1(i);
      double y1 = b.bg.r_b + z1 + (fd.N - z1) / fd.N * b.W.W6[j];
      double sw = y1 * st.U3 * std::sin(b.theta[i][j]);
      if (i == 0) {
        ref = sw;
        swirl_scale = std::max(swirl_scale, std::abs(sw));
      } else {
        swirl = std::max(swirl, std::abs(sw - ref));
      }
    }
  }
  add_le("bernoulli_invariance", bern, 1e-6);
  add_le("entropy_invariance", entr, 1e-12);
  add_le("swirl_invariance", swirl, 1e-6 * swirl_scale + 1e-12);

  // axis symmetry: flow angle and swirl vanish linearly toward the axis
  double ax = 0.0;
  for (int i = 0; i <= n1; ++i)
    ax = std::max({ax, std::abs(b.W.W2[i][0]), std::abs(b.W.W3[i][0])});
  add_le("axis_symmetry", ax, 50.0 * eps_floor * hs);

  // wall slip: extrapolated flow angle matches the wall-shape slope
  double slip = 0.0;
  for (int i = 0; i <= n1; ++i) {
    double z1 = fd.z1(i);
    double y1 = b.bg.r_b + z1 + (fd.N - z1) / fd.N * b.W.W6M;
    double target = eps * y1 * b.cfg.pert.f.deriv(y1 - b.bg.geom.r1);
    double w2w = 1.5 * b.W.W2[i][n2 - 1] - 0.5 * b.W.W2[i][n2 - 2];
    slip = std::max(slip, std::abs(w2w - target));
  }
  add_le("wall_slip", slip, 50.0 * eps_floor * hs + 1e-10);

  // chart Jacobian positivity: theta strictly increasing across cells
  double minspace = 1e300;
  for (int i = 0; i <= n1; ++i) {
    minspace = std::min(minspace, b.theta[i][0]);
    for (int j = 0; j + 1 < n2; ++j)
      minspace = std::min(minspace, b.theta[i][j + 1] - b.theta[i][j]);
  }
  add("jacobian_positivity", minspace, 0.0, minspace > 0.0);

  if (level >= 1) {
    // interior residuals of the exact equations at the current state
    SubsonicIteration it(b.bg, b.sup, b.cfg.pert, b.cfg.P0, fd,
                         /*factor=*/false);
    IterationData d = it.compute_data(b.W);
    double res = 0.0;
    for (int i = 0; i <= n1; ++i)
      for (int j = 0; j < n2; ++j)
        res = std::max({res, std::abs(d.E1[i][j]), std::abs(d.E2[i][j])});
    // the exact-operator residual is dominated by the shock/wall corner
    // cells, which stay O(epsilon) under refinement; an injected field
    // corruption exceeds this bound by orders of magnitude
    add_le("interior_residual", res, 50.0 * eps_floor + 1e-9);

    // marched supersonic interior residuals on a coarse sample
    double sres = 0.0;
    for (int li : {1, 2, 3})
      for (int ji : {1, 2, 3})
        sres = std::max(sres, interior_residual(b.sup, li * b.sup.nr / 4,
                                                ji * b.sup.nsig / 4));
    // dominated by the r-difference truncation of the background profile,
    // so the bound does not scale with epsilon
    double hsm = b.bg.geom.theta0 / double(b.sup.nsig);
    double drm = (b.bg.geom.r2 - b.bg.geom.r1) / double(b.sup.nr);
    add_le("supersonic_residual", sres, 20.0 * (hsm * hsm + drm * drm));
  }

  if (b.cfg.straight_wall) {
    // tangential derivatives of (U1, U3, P, S) along the straight wall:
    // d/dtheta = (d/ds) / (dtheta/ds), one-sided differences at the wall
    // second-order derivative AT the wall point s = M from the last three
    // cell centers (distances hs/2, 3hs/2, 5hs/2 behind the wall)
    auto wall_deriv = [&](const Grid2& w, int i) {
      return (2.0 * w[i][n2 - 1] - 3.0 * w[i][n2 - 2] + w[i][n2 - 3]) / hs;
    };
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i <= n1; ++i) {
      double dth = wall_deriv(b.theta, i);
      for (const Grid2* w : {&b.W.W1, &b.W.W3, &b.W.W4, &b.W.W5}) {
        worst = std::max(worst, std::abs(wall_deriv(*w, i) / dth));
        for (int j = 0; j < n2; ++j)
          scale = std::max(scale, std::abs((*w)[i][j]));
      }
    }
    // scaled tolerance 10 h^2 (scale is the sup of the perturbation fields)
    // plus the marching-grid truncation carried into the downstream data,
    // which is proportional to epsilon and independent of (n1, n2)
    double hsm = b.bg.geom.theta0 / double(b.sup.nsig);
    double drm = (b.bg.geom.r2 - b.bg.geom.r1) / double(b.sup.nr);
    double march_term = 30.0 * eps * (hsm * hsm + drm * drm);
    add_le("straight_wall_dtheta", worst,
           10.0 * hs * hs * std::max(scale, eps_floor) /
                   (b.bg.geom.theta0 * b.bg.geom.theta0) +
               march_term + 1e-10);
    ShockCurve sc = shock_curve(b);
    add_le("straight_wall_xi_slope", sc.wall_slope(),
           10.0 * hs * hs * std::max(std::abs(b.W.W6M), eps_floor) /
                   (b.bg.geom.theta0 * b.bg.geom.theta0) +
               march_term + 1e-10);
  }

  json out;
  out["epsilon"] = eps;
  out["grid"] = {{"n1", n1}, {"n2", n2}};
  out["r_b"] = b.bg.r_b;
  out["level"] = level;
  bool all = true;
  json arr = json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"value", c.value},
                   {"tolerance", c.tol},
                   {"pass", c.pass}});
    all = all && c.pass;
  }
  out["checks"] = arr;
  out["pass"] = all;
  return out;
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

inline std::string background_csv(const BackgroundSolution& bg,
                                  int nsamp = 201) {
  std::string out = csv_row({"r", "branch", "U", "rho", "P", "Mach"});
  auto emit = [&](double r, const char* branch, const FlowState& st) {
    out += csv_row({fmt17(r), branch, fmt17(st.U1),
                    fmt17(density(st, bg.gas)), fmt17(st.P),
                    fmt17(mach(st, bg.gas))});
  };
  for (int k = 0; k < nsamp; ++k) {
    double r = bg.geom.r1 +
               (bg.geom.r2 - bg.geom.r1) * double(k) / double(nsamp - 1);
    emit(r, "supersonic", bg.sup(r));
  }
  for (int k = 0; k < nsamp; ++k) {
    double r = bg.r_b + (bg.geom.r2 - bg.r_b) * double(k) / double(nsamp - 1);
    emit(r, "subsonic", bg.sub(r));
  }
  out += csv_row({"summary", fmt17(bg.r_b), fmt17(bg.range.P1),
                  fmt17(bg.range.P2)});
  return out;
}

inline std::string supersonic_csv(const SupersonicField& F) {
  std::string out =
      csv_row({"r", "theta", "U1", "U2", "U3", "P", "S", "Mach"});
  for (int lev = 0; lev <= F.nr; ++lev) {
    double r = F.rs[lev];
    double w = F.wfac(r);
    for (int j = 0; j <= F.nsig; ++j) {
      FlowState st = F.state_at(lev, j);
      double th = F.sigma(j) * w;
      out += csv_row({fmt17(r), fmt17(th), fmt17(st.U1), fmt17(st.U2),
                      fmt17(st.U3), fmt17(st.P), fmt17(st.S),
                      fmt17(mach(st, F.gas))});
    }
  }
  return out;
}

inline std::string shock_csv(const ShockCurve& c) {
  std::string out = csv_row({"theta", "xi"});
  for (std::size_t j = 0; j < c.th.size(); ++j)
    out += csv_row({fmt17(c.th[j]), fmt17(c.xi[j])});
  return out;
}

inline std::string fields_csv(const EulerianField& e) {
  std::string out = csv_row(
      {"r", "theta", "U1", "U2", "U3", "P", "S", "Mach", "region"});
  for (std::size_t i = 0; i < e.r.size(); ++i)
    for (std::size_t j = 0; j < e.th.size(); ++j)
      out += csv_row({fmt17(e.r[i]), fmt17(e.th[j]), fmt17(e.U1[i][j]),
                      fmt17(e.U2[i][j]), fmt17(e.U3[i][j]), fmt17(e.P[i][j]),
                      fmt17(e.S[i][j]), fmt17(e.Mach[i][j]),
                      e.region[i][j] ? "subsonic" : "supersonic"});
  return out;
}

inline std::string convergence_jsonl(const IterationReport& rep) {
  std::string out;
  for (const auto& e : rep.entries) {
    json row = {{"k", e.k},
                {"norm", e.norm},
                {"update", e.update},
                {"ratio", e.ratio},
                {"residual", e.residual}};
    out += row.dump();
    out += '\n';
  }
  return out;
}

inline json report_json(const SolutionBundle& b) {
  json rep;
  rep["r_b"] = b.bg.r_b;
  rep["P_e"] = b.cfg.P_e;
  rep["epsilon"] = b.cfg.pert.epsilon;
  rep["N"] = b.fd.N;
  rep["M"] = b.fd.M;
  rep["grid"] = {{"n1", b.fd.n1}, {"n2", b.fd.n2}};
  rep["march_grid"] = {{"nsig", b.cfg.nsig}, {"nr", b.cfg.nr}};
  rep["converged"] = b.rep.converged;
  rep["iterations"] = b.rep.iters;
  rep["final_update"] = b.rep.final_update;
  rep["tol"] = b.rep.tol;
  rep["delta"] = b.rep.delta;
  rep["logdet"] = b.rep.logdet;
  rep["norm"] = b.rep.entries.empty() ? 0.0 : b.rep.entries.back().norm;
  rep["runtime_s"] = b.runtime_s;
  return rep;
}

/// Write the four solve outputs into out_dir (which must exist).
inline void write_solve_outputs(const SolutionBundle& b,
                                const std::string& out_dir) {
  EulerianField e = reconstruct_eulerian(b);
  write_text_file(out_dir + "/shock.csv", shock_csv(e.shock));
  write_text_file(out_dir + "/fields.csv", fields_csv(e));
  write_text_file(out_dir + "/convergence.jsonl", convergence_jsonl(b.rep));
  write_text_file(out_dir + "/report.json", report_json(b).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string value;
  bool ok = false;
  std::string error;
  double r_b = 0.0, norm = 0.0, ratio = 0.0, rh_residual = 0.0;
  int iters = 0;
  double runtime_s = 0.0;
};

/// Largest contraction ratio measured above the solver noise floor.
inline double measured_contraction_ratio(const IterationReport& rep) {
  double r = 0.0;
  for (const auto& e : rep.entries)
    if (e.k > 1 && e.update > 100.0 * rep.tol) r = std::max(r, e.ratio);
  return r;
}

inline std::vector<SweepRow> sweep(const CaseConfig& base,
                                   const std::string& param,
                                   const std::vector<std::string>& values) {
  if (param != "epsilon" && param != "grid" && param != "P_e")
    throw ConfigError("sweep: parameter must be epsilon, grid, or P_e");
  std::vector<SweepRow> rows;
  for (const std::string& v : values) {
    SweepRow row;
    row.value = v;
    try {
      CaseConfig cfg = base;
      if (param == "epsilon") {
        double e;
        if (!detail::parse_double(v, &e) || e < 0.0)
          throw ConfigError("sweep: bad epsilon value '" + v + "'");
        cfg.pert.epsilon = e;
      } else if (param == "P_e") {
        double p;
        if (!detail::parse_double(v, &p) || p <= 0.0)
          throw ConfigError("sweep: bad P_e value '" + v + "'");
        cfg.P_e = p;
      } else {
        std::size_t x = v.find('x');
        int a = 0, c = 0;
        if (x == std::string::npos ||
            !detail::parse_int(v.substr(0, x), &a) ||
            !detail::parse_int(v.substr(x + 1), &c) || a < 8 || c < 8)
          throw ConfigError("sweep: bad grid value '" + v +
                            "' (expected <n1>x<n2>)");
        cfg.n1 = a;
        cfg.n2 = c;
      }
      SolutionBundle b = run_case(cfg);
      row.ok = true;
      row.r_b = b.bg.r_b;
      row.norm = b.rep.entries.empty() ? 0.0 : b.rep.entries.back().norm;
      row.ratio = measured_contraction_ratio(b.rep);
      row.rh_residual = shock_rh_residual(b);
      row.iters = b.rep.iters;
      row.runtime_s = b.runtime_s;
    } catch (const std::exception& ex) {
      row.ok = false;
      row.error = ex.what();
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_csv(const std::string& param,
                             const std::vector<SweepRow>& rows) {
  std::string out = csv_row({param, "status", "error", "r_b", "iters", "norm",
                             "ratio", "rh_residual", "runtime_s"});
  for (const auto& r : rows)
    out += csv_row({r.value, r.ok ? "ok" : "failed", r.error, fmt17(r.r_b),
                    std::to_string(r.iters), fmt17(r.norm), fmt17(r.ratio),
                    fmt17(r.rh_residual), fmt17(r.runtime_s)});
  return out;
}

}  // namespace tsn

#endif  // TSN_HARNESS_HPP_
