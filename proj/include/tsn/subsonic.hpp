#ifndef TSN_SUBSONIC_HPP_
#define TSN_SUBSONIC_HPP_

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsn/background.hpp"
#include "tsn/gas.hpp"
#include "tsn/lagrangian.hpp"
#include "tsn/shock_rh.hpp"
#include "tsn/supersonic.hpp"
#include "tsn/util.hpp"

namespace tsn {

using Grid2 = std::vector<std::vector<double>>;  // [i in 0..n1][j in 0..n2-1]

inline Grid2 make_grid(int n1, int n2, double v = 0.0) {
  return Grid2(std::size_t(n1) + 1, std::vector<double>(std::size_t(n2), v));
}

// ---------------------------------------------------------------------------
// Linearized operator coefficients on the z1 grid
// ---------------------------------------------------------------------------

struct LinearOperatorCoefficients {
  // z1 node tables, size n1+1
  std::vector<double> lam1, lam2, lam3, lam4, lam5, lam6;
  std::vector<double> a1c, a2c, a3c;
  std::vector<double> e3, e4, e5, e6;
  std::vector<double> Ub, Pb, Pbp, Pbpp, c2b, rhob;
  std::vector<double> cL;    // (c^2+U^2)/((rb+z1)(c^2-U^2))
  std::vector<double> K5;    // gamma Pb Ub^2/(kb (rb+z1)(c^2-Ub^2))
  std::vector<double> kap3;  // (rb+z1)/Ub * (z1-N)/N * Pb'
  double a4 = 0.0;
  // scalars
  double a = 0.0, e1 = 0.0, e2 = 0.0, kb = 0.0;
  double N = 0.0, rb = 0.0;
};

/// Analytic e-coefficients at radius r on the subsonic background branch.
inline void e_coeffs_at(const BackgroundSolution& bg, double r, double* e3,
                        double* e4, double* e5, double* e6) {
  const GasConstants& g = bg.gas;
  FlowState st = bg.sub(r);
  double rho = density(st, g);
  double c2 = g.gamma * st.P / rho;
  double U = st.U1, P = st.P;
  double D = c2 - U * U;
  if (e3) *e3 = 4.0 * g.gamma * P * c2 / D;
  if (e4)
    *e4 = 2.0 * g.gamma * (rho * U * U * U * U - P * U * U + 2.0 * P * c2) /
          (r * rho * D * D);
  if (e5)
    *e5 = 2.0 * g.gamma * P * P * (U * U + 2.0 * c2 / (g.gamma - 1.0)) /
          (g.c_v * r * rho * D * D);
  if (e6)
    *e6 = 2.0 * g.gamma * bg.geom.r2 * P * U * U / (bg.N() * r * r * D);
}

/// Assemble the z1 coefficient tables of the linearized problem. The weight
/// lambda4 = exp(int_0^{z1} e4) uses per-interval 5-point Gauss quadrature of
/// the analytic integrand; everything else is closed-form.
inline LinearOperatorCoefficients assemble_coefficients(
    const BackgroundSolution& bg, int n1) {
  LinearOperatorCoefficients co;
  const double N = bg.N();
  const double h1 = N / double(n1);
  co.N = N;
  co.rb = bg.r_b;
  co.kb = bg.kappa_b();
  LinearJumpCoefficients jc = linear_jump_coefficients(bg);
  co.a = jc.a;
  co.e1 = jc.e1;
  co.e2 = jc.e2;

  for (auto* v : {&co.lam1, &co.lam2, &co.lam3, &co.lam4, &co.lam5, &co.lam6,
                  &co.a1c, &co.a2c, &co.a3c, &co.e3, &co.e4, &co.e5, &co.e6,
                  &co.Ub, &co.Pb, &co.Pbp, &co.Pbpp, &co.c2b, &co.rhob,
                  &co.cL, &co.K5, &co.kap3})
    v->assign(n1 + 1, 0.0);

  const GasConstants& g = bg.gas;
  for (int i = 0; i <= n1; ++i) {
    double z1 = double(i) * h1;
    double r = bg.r_b + z1;
    FlowState st = bg.sub(r);
    RadialDerivs d = bg.sub_derivs(r);
    double rho = density(st, g);
    double c2 = g.gamma * st.P / rho;
    double D = c2 - st.U1 * st.U1;
    co.Ub[i] = st.U1;
    co.Pb[i] = st.P;
    co.Pbp[i] = d.dP;
    co.Pbpp[i] = d.d2P;
    co.c2b[i] = c2;
    co.rhob[i] = rho;
    e_coeffs_at(bg, r, &co.e3[i], &co.e4[i], &co.e5[i], &co.e6[i]);
    co.cL[i] = (c2 + st.U1 * st.U1) / (r * D);
    co.K5[i] = g.gamma * st.P * st.U1 * st.U1 / (co.kb * r * D);
    co.kap3[i] = (r / st.U1) * ((z1 - N) / N) * d.dP;
  }

  // lambda1..lambda3 have closed forms: the lambda1 integrand is the exact
  // logarithmic derivative of 1/((rb+z1) Ub), so lambda1 = (rb+z1)Ub/(rb Ub0)
  double rU0 = bg.r_b * co.Ub[0];
  for (int i = 0; i <= n1; ++i) {
    double r = bg.r_b + double(i) * h1;
    co.lam1[i] = r * co.Ub[i] / rU0;
    co.lam2[i] = r * r / rU0;
    co.lam3[i] = co.a * co.kap3[i] * co.lam1[i];
  }

  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  co.lam4[0] = 1.0;
  for (int i = 0; i < n1; ++i) {
    double za = double(i) * h1, zb = double(i + 1) * h1;
    double I = 0.0;
    for (int q = 0; q < 5; ++q) {
      double z = 0.5 * (za + zb) + 0.5 * h1 * gx[q];
      double e4v;
      e_coeffs_at(bg, bg.r_b + z, nullptr, &e4v, nullptr, nullptr);
      I += 0.5 * h1 * gw[q] * e4v;
    }
    co.lam4[i + 1] = co.lam4[i] * std::exp(I);
  }
  for (int i = 0; i <= n1; ++i) {
    double z1 = double(i) * h1;
    co.lam5[i] = co.K5[i] * co.lam4[i];
    co.lam6[i] = (co.e6[i] + co.e2 * co.e5[i]) * co.lam4[i];
    co.a1c[i] = co.lam4[i] / co.lam2[i];
    co.a2c[i] = co.lam5[i] / co.lam1[i];
    // a3 = d/dz1(lam4 lam3/lam2) - a lam6, with
    // lam4 lam3/lam2 = a lam4 (z1-N) Pb'/N differentiated analytically
    // (lam4' = e4 lam4)
    double dd = (co.a / N) * co.lam4[i] *
                (co.e4[i] * (z1 - N) * co.Pbp[i] + co.Pbp[i] +
                 (z1 - N) * co.Pbpp[i]);
    co.a3c[i] = dd - co.a * co.lam6[i];
  }
  co.a4 = co.a * co.e1 * co.lam2[0] + co.lam3[0];
  return co;
}

// ---------------------------------------------------------------------------
// Potential solver (axisymmetric second-order problem with a nonlocal trace)
// ---------------------------------------------------------------------------

struct PotentialSolution {
  Grid2 U;          // potential on the (n1+1) x n2 grid
  double mu = 0.0;  // trace value at (0, M), extrapolated with the wall slope
  double logdet = 0.0;
};

/// Direct sparse solver for the lifted potential problem
///   d/dz1(a1 d/dz1 Y) + a2 [d1 (1/s) d/ds(s d1 dY/ds)] - (kb^2/4) a2 s dY/ds
///     + a3(z1) Y(0,s) = rhs            in the interior,
///   dY/dz1(0,s) + a4 Y(0,s) = g1(s),   dY/dz1(N,s) = g2(s),
///   dY/ds(z1,M) = g3(z1),              zero flux at the axis.
/// The matrix depends only on background coefficients: factor once, solve
/// once per outer iteration.
class PotentialSolver {
 public:
  PotentialSolver(const FixedDomain& fd, const LinearOperatorCoefficients& co)
      : fd_(fd), co_(co) {
    fd.validate();
    const int n1 = fd.n1, n2 = fd.n2;
    const double h1 = fd.h1(), hs = fd.hs();
    const double kb = co.kb;
    auto idx = [&](int i, int j) { return i * n2 + j; };
    std::vector<Eigen::Triplet<double>> T;
    T.reserve(std::size_t(n1 + 1) * n2 * 8);
    for (int j = 0; j < n2; ++j) {
      // Robin row at z1 = 0 (second-order one-sided derivative)
      T.emplace_back(idx(0, j), idx(0, j), -3.0 / (2.0 * h1) + co.a4);
      T.emplace_back(idx(0, j), idx(1, j), 4.0 / (2.0 * h1));
      T.emplace_back(idx(0, j), idx(2, j), -1.0 / (2.0 * h1));
      // Neumann row at z1 = N
      T.emplace_back(idx(n1, j), idx(n1, j), 3.0 / (2.0 * h1));
      T.emplace_back(idx(n1, j), idx(n1 - 1, j), -4.0 / (2.0 * h1));
      T.emplace_back(idx(n1, j), idx(n1 - 2, j), 1.0 / (2.0 * h1));
    }
    for (int i = 1; i < n1; ++i) {
      double a1m = 0.5 * (co.a1c[i - 1] + co.a1c[i]);
      double a1p = 0.5 * (co.a1c[i] + co.a1c[i + 1]);
      double a2 = co.a2c[i];
      for (int j = 0; j < n2; ++j) {
        int row = idx(i, j);
        double s = fd.s(j);
        T.emplace_back(row, idx(i - 1, j), a1m / (h1 * h1));
        T.emplace_back(row, idx(i + 1, j), a1p / (h1 * h1));
        double diag = -(a1m + a1p) / (h1 * h1);
        // s-diffusion in flux form with face coefficient s d1(s);
        // the axis face coefficient vanishes identically
        double cdif = a2 * chart_d1(s, kb) / s;
        double sp = double(j + 1) * hs, sm = double(j) * hs;
        double fp = sp * chart_d1(sp, kb);
        double fm = sm * chart_d1(sm, kb);
        if (j + 1 < n2) {
          T.emplace_back(row, idx(i, j + 1), cdif * fp / (hs * hs));
          diag += -cdif * fp / (hs * hs);
        }
        // at the wall the ghost value Y_{n2} = Y_{n2-1} + hs g3 contributes
        // only a known flux, moved to the right-hand side in solve()
        if (j > 0) {
          T.emplace_back(row, idx(i, j - 1), cdif * fm / (hs * hs));
          diag += -cdif * fm / (hs * hs);
        }
        // advection -(kb^2/4) a2 s dY/ds, central with reflection ghosts
        double cadv = -(kb * kb / 4.0) * a2 * s / (2.0 * hs);
        if (j == 0) {
          T.emplace_back(row, idx(i, 1), cadv);
          diag += -cadv;  // ghost Y_{-1} = Y_0
        } else if (j + 1 == n2) {
          diag += cadv;  // ghost Y_{n2} = Y_{n2-1} + hs g3
          T.emplace_back(row, idx(i, j - 1), -cadv);
        } else {
          T.emplace_back(row, idx(i, j + 1), cadv);
          T.emplace_back(row, idx(i, j - 1), -cadv);
        }
        // nonlocal trace coupling a3(z1) Y(0, s)
        T.emplace_back(row, idx(0, j), co.a3c[i]);
        T.emplace_back(row, row, diag);
      }
    }
    Eigen::SparseMatrix<double> A((n1 + 1) * n2, (n1 + 1) * n2);
    A.setFromTriplets(T.begin(), T.end());
    A.makeCompressed();
    lu_.compute(A);
    if (lu_.info() != Eigen::Success)
      throw SolveError("PotentialSolver: sparse factorization failed");
    logdet_ = lu_.logAbsDeterminant();
  }

  /// Solve with raw data: interior rhs(i,j) used for 1<=i<=n1-1, Robin data
  /// g1(j), Neumann data g2(j), and the wall slope g3(i).
  PotentialSolution solve(const Grid2& rhs, const std::vector<double>& g1,
                          const std::vector<double>& g2,
                          const std::vector<double>& g3) const {
    const int n1 = fd_.n1, n2 = fd_.n2;
    const double hs = fd_.hs();
    const double kb = co_.kb;
    auto idx = [&](int i, int j) { return i * n2 + j; };
    Eigen::VectorXd b((n1 + 1) * n2);
    for (int j = 0; j < n2; ++j) {
      b[idx(0, j)] = g1[j];
      b[idx(n1, j)] = g2[j];
    }
    for (int i = 1; i < n1; ++i) {
      double a2 = co_.a2c[i];
      for (int j = 0; j < n2; ++j) {
        double v = rhs[i][j];
        if (j + 1 == n2) {
          double s = fd_.s(j);
          double cdif = a2 * chart_d1(s, kb) / s;
          double fp = fd_.M * chart_d1(fd_.M, kb);
          v -= cdif * fp * g3[i] / hs;  // known wall diffusion flux
          double cadv = -(kb * kb / 4.0) * a2 * s / (2.0 * hs);
          v -= cadv * hs * g3[i];  // known wall ghost in the advection
        }
        b[idx(i, j)] = v;
      }
    }
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success)
      throw SolveError("PotentialSolver: linear solve failed");
    PotentialSolution out;
    out.U = make_grid(n1, n2);
    for (int i = 0; i <= n1; ++i)
      for (int j = 0; j < n2; ++j) out.U[i][j] = x[idx(i, j)];
    out.mu = out.U[0][n2 - 1] + 0.5 * hs * g3[0];
    out.logdet = logdet_;
    return out;
  }

  double logdet() const { return logdet_; }

 private:
  FixedDomain fd_;
  LinearOperatorCoefficients co_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  double logdet_ = 0.0;
};

/// Recover (W2, W4, W6(M)) from the potential. J1 is the weighted tail
/// integral of G1; g1,g2,g3 are the boundary data used in the solve.
inline void recover_W2_W4(const FixedDomain& fd,
                          const LinearOperatorCoefficients& co,
                          const PotentialSolution& ps, const Grid2& J1,
                          const std::vector<double>& g1,
                          const std::vector<double>& g2,
                          const std::vector<double>& g3, Grid2* W2, Grid2* W4,
                          double* W6M) {
  const int n1 = fd.n1, n2 = fd.n2;
  const double h1 = fd.h1(), hs = fd.hs();
  *W2 = make_grid(n1, n2);
  *W4 = make_grid(n1, n2);
  for (int i = 0; i <= n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      double s = fd.s(j);
      double dUs;  // d/ds with axis reflection and the wall-slope ghost
      if (j == 0)
        dUs = (ps.U[i][1] - ps.U[i][0]) / (2.0 * hs);
      else if (j + 1 == n2)
        dUs = (ps.U[i][j] + hs * g3[i] - ps.U[i][j - 1]) / (2.0 * hs);
      else
        dUs = (ps.U[i][j + 1] - ps.U[i][j - 1]) / (2.0 * hs);
      (*W2)[i][j] = -chart_d1(s, co.kb) * dUs / co.lam1[i];
      double dUx;  // d/dz1; boundary rows use the exact boundary conditions
      if (i == 0)
        dUx = g1[j] - co.a4 * ps.U[0][j];
      else if (i == n1)
        dUx = g2[j];
      else
        dUx = (ps.U[i + 1][j] - ps.U[i - 1][j]) / (2.0 * h1);
      (*W4)[i][j] = (dUx - J1[i][j] + co.lam3[i] * ps.U[0][j]) / co.lam2[i];
    }
  }
  *W6M = -co.a * ps.mu;
}

// ---------------------------------------------------------------------------
// Perturbation state and the discrete iteration norm
// ---------------------------------------------------------------------------

struct PerturbationState {
  Grid2 W1, W2, W3, W4, W5;
  std::vector<double> W6;  // cell-centered shock displacement profile
  double W6M = 0.0;        // shock displacement at the wall flux value M

  static PerturbationState zero(int n1, int n2) {
    PerturbationState st;
    st.W1 = make_grid(n1, n2);
    st.W2 = make_grid(n1, n2);
    st.W3 = make_grid(n1, n2);
    st.W4 = make_grid(n1, n2);
    st.W5 = make_grid(n1, n2);
    st.W6.assign(n2, 0.0);
    return st;
  }
};

inline double grid_norm(const Grid2& w) {
  double sup = 0.0, dif = 0.0;
  const int n1 = int(w.size()) - 1, n2 = int(w[0].size());
  for (int i = 0; i <= n1; ++i)
    for (int j = 0; j < n2; ++j) {
      sup = std::max(sup, std::abs(w[i][j]));
      if (i < n1) dif = std::max(dif, std::abs(w[i + 1][j] - w[i][j]));
      if (j + 1 < n2) dif = std::max(dif, std::abs(w[i][j + 1] - w[i][j]));
    }
  return sup + dif;
}

/// Discrete surrogate of the iteration norm: max over components of the
/// sup-norm plus the sup-norm of first differences.
inline double state_norm(const PerturbationState& st) {
  double v = std::max({grid_norm(st.W1), grid_norm(st.W2), grid_norm(st.W3),
                       grid_norm(st.W4), grid_norm(st.W5)});
  double w6 = std::abs(st.W6M);
  for (std::size_t j = 0; j < st.W6.size(); ++j) {
    w6 = std::max(w6, std::abs(st.W6[j]));
    if (j + 1 < st.W6.size())
      w6 = std::max(w6, std::abs(st.W6[j + 1] - st.W6[j]));
  }
  return std::max(v, w6);
}

inline PerturbationState state_diff(const PerturbationState& A,
                                    const PerturbationState& B) {
  PerturbationState d = A;
  auto sub = [](Grid2& x, const Grid2& y) {
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] -= y[i][j];
  };
  sub(d.W1, B.W1);
  sub(d.W2, B.W2);
  sub(d.W3, B.W3);
  sub(d.W4, B.W4);
  sub(d.W5, B.W5);
  for (std::size_t j = 0; j < d.W6.size(); ++j) d.W6[j] -= B.W6[j];
  d.W6M -= B.W6M;
  return d;
}

// ---------------------------------------------------------------------------
// Hat-state evaluation helpers
// ---------------------------------------------------------------------------

/// Subsonic background profiles on a refined z1 grid extended beyond [0,N],
/// aligned with the coarse nodes so unperturbed lookups reproduce the exact
/// node values.
struct BackgroundTables {
  double x0 = 0.0, h = 1.0;
  std::vector<double> U, P;

  BackgroundTables() = default;
  BackgroundTables(const BackgroundSolution& bg, int n1) {
    double N = bg.N();
    h = 0.5 * N / double(n1);
    int padl = int(std::ceil(0.35 * N / h));
    // shrink the left pad if the subsonic branch ceases to exist there
    while (padl > 0) {
      try {
        bg.sub(bg.r_b - double(padl) * h);
        break;
      } catch (const SolveError&) {
        --padl;
      }
    }
    x0 = -double(padl) * h;
    int count = 2 * n1 + 1 + padl + int(std::ceil(0.35 * N / h));
    U.resize(count);
    P.resize(count);
    for (int k = 0; k < count; ++k) {
      FlowState st = bg.sub(bg.r_b + x0 + double(k) * h);
      U[k] = st.U1;
      P[k] = st.P;
    }
  }
  void check(double z) const {
    if (z < x0 || z > x0 + h * double(U.size() - 1))
      throw SolveError("BackgroundTables: z1 outside the tabulated range " +
                       fmt17(z));
  }
  double Ub(double z) const {
    check(z);
    return cubic_uniform(U, x0, h, z);
  }
  double Pb(double z) const {
    check(z);
    return cubic_uniform(P, x0, h, z);
  }
};

/// Per-row z1-extension of the hat grid fields to [-N, 2N].
struct HatExtension {
  std::vector<ExtendedField> W1, W4, W5;  // one extension per z2 cell
  std::vector<double> W6;                 // cell-centered samples
  double W6M = 0.0;
  double hs = 1.0, N = 1.0;

  HatExtension(const PerturbationState& st, const FixedDomain& fd) {
    hs = fd.hs();
    N = fd.N;
    const int n1 = fd.n1, n2 = fd.n2;
    auto build = [&](const Grid2& w, std::vector<ExtendedField>& out) {
      out.reserve(n2);
      std::vector<double> col(n1 + 1);
      for (int j = 0; j < n2; ++j) {
        for (int i = 0; i <= n1; ++i) col[i] = w[i][j];
        out.emplace_back(col, fd.N);
      }
    };
    build(st.W1, W1);
    build(st.W4, W4);
    build(st.W5, W5);
    W6 = st.W6;
    W6M = st.W6M;
  }
};

/// Chart angle theta_hat(z1, s_j) of the hat state for every grid node,
/// integrating the inverse mass-flux density along the z2 line through the
/// skewed shock-fitted chart. Cumulative trapezoid over cell centers with
/// the exact axis closure g(0)=0: reproduces the background angle to
/// roundoff for the zero hat state (the integrand is then linear in s).
inline Grid2 theta_hat_table(const FixedDomain& fd, const HatExtension& hx,
                             const BackgroundTables& bt,
                             const BackgroundSolution& bg) {
  const int n1 = fd.n1, n2 = fd.n2;
  const double N = fd.N, hs = fd.hs();
  const GasConstants& g = bg.gas;
  const double Sb = bg.S_plus;
  // per-cell chart skewing factors
  std::vector<double> fk(n2), ck(n2);
  for (int k = 0; k < n2; ++k) {
    double w6 = hx.W6[k];
    if (!(N - w6 > 0.0))
      throw SolveError("theta_hat_table: shock displacement reaches the exit");
    fk[k] = N / (N - w6);
    ck[k] = w6 * N / (N - w6);
  }
  Grid2 th = make_grid(n1, n2);
  for (int i = 0; i <= n1; ++i) {
    double z1 = fd.z1(i);
    for (int j = 0; j < n2; ++j) {
      double zoff = z1 + (N - z1) / N * hx.W6[j];
      double y1 = bg.r_b + zoff;
      double I = 0.0, prev = 0.0;
      for (int k = 0; k <= j; ++k) {
        double s = fd.s(k);
        double z1p = zoff * fk[k] - ck[k];
        double P = bt.Pb(z1p) + hx.W4[k](z1p);
        double S = Sb + hx.W5[k](z1p);
        if (!(P > 0.0))
          throw SolveError("theta_hat_table: nonpositive pressure");
        double rho = density_from_PS(P, S, g);
        double U1 = bt.Ub(z1p) + hx.W1[k](z1p);
        if (!(U1 > 0.0))
          throw SolveError("theta_hat_table: nonpositive radial velocity");
        double cur = 2.0 * s / (y1 * y1 * rho * U1);
        if (k == 0)
          I = 0.25 * hs * cur;  // trapezoid on [0, s_0] with g(0)=0
        else
          I += 0.5 * hs * (prev + cur);
        prev = cur;
      }
      double arg = 1.0 - I;
      if (arg < -1.0 || arg > 1.0)
        throw SolveError("theta_hat_table: arccos argument outside [-1,1]");
      th[i][j] = std::acos(arg);
    }
  }
  return th;
}

// ---------------------------------------------------------------------------
// Nonlinear data of one outer iteration
// ---------------------------------------------------------------------------

/// Upstream trace data and jump remainders per z2 cell.
struct TraceData {
  std::vector<FlowState> up;  // supersonic state on the hat shock trace
  std::vector<double> B;      // upstream Bernoulli along the trace
  std::vector<double> R3, R4, R11, R12;
};

struct IterationData {
  Grid2 theta;            // hat chart angle
  Grid2 E1, E2, L1, L2;   // exact and linearized operators at the hat state
  Grid2 F3, F4, G1, G2;   // iteration right-hand sides
  Grid2 J1;               // weighted tail integral of G1
  Grid2 rhs;              // interior right-hand side of the potential solve
  std::vector<double> g1, g2, g3;  // potential boundary data
  TraceData trace;
};

namespace detail {

// one-sided/central z1 derivative at node i (second order)
inline double d1node(const Grid2& w, int i, int j, double h1, int n1) {
  if (i == 0) return (-3.0 * w[0][j] + 4.0 * w[1][j] - w[2][j]) / (2.0 * h1);
  if (i == n1)
    return (3.0 * w[n1][j] - 4.0 * w[n1 - 1][j] + w[n1 - 2][j]) / (2.0 * h1);
  return (w[i + 1][j] - w[i - 1][j]) / (2.0 * h1);
}

// z2 derivative at cell j with an axis parity ghost; one-sided at the wall
inline double d2cell(const Grid2& w, int i, int j, double hs, int n2,
                     int parity) {
  if (j == 0) return (w[i][1] - double(parity) * w[i][0]) / (2.0 * hs);
  if (j == n2 - 1)
    return (3.0 * w[i][j] - 4.0 * w[i][j - 1] + w[i][j - 2]) / (2.0 * hs);
  return (w[i][j + 1] - w[i][j - 1]) / (2.0 * hs);
}

inline std::vector<double> d2profile(const std::vector<double>& f, double hs) {
  const int n = int(f.size());
  std::vector<double> d(n, 0.0);
  for (int j = 0; j < n; ++j) {
    if (j == 0)
      d[j] = (f[1] - f[0]) / (2.0 * hs);  // even reflection at the axis
    else if (j == n - 1)
      d[j] = (3.0 * f[j] - 4.0 * f[j - 1] + f[j - 2]) / (2.0 * hs);
    else
      d[j] = (f[j + 1] - f[j - 1]) / (2.0 * hs);
  }
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The free-boundary iteration
// ---------------------------------------------------------------------------

struct SubsonicOptions {
  int max_iter = 60;
  double tol = 0.0;    // 0: automatic max(1e-8 epsilon, 2e-12)
  double delta = 0.0;  // 0: automatic 10 * max(epsilon, 1e-6) * scale
};

struct IterationEntry {
  int k = 0;
  double norm = 0.0;      // norm of the iterate
  double update = 0.0;    // norm of the change from the previous iterate
  double ratio = 0.0;     // update contraction ratio (0 for the first step)
  double residual = 0.0;  // max |F| of the iteration right-hand sides
};

struct IterationReport {
  std::vector<IterationEntry> entries;
  bool converged = false;
  int iters = 0;
  double final_update = 0.0;
  double tol = 0.0, delta = 0.0;
  double logdet = 0.0;  // log |det| of the factored potential matrix
};

/// Shared context of the subsonic free-boundary iteration: background
/// coefficient tables, the factored potential matrix, and the supersonic
/// field providing upstream data along the moving shock trace.
class SubsonicIteration {
 public:
  /// P0 is the exit-pressure perturbation profile in the polar angle,
  /// multiplied by epsilon of the inlet perturbation. `factor = false` skips
  /// the sparse factorization for callers that only evaluate compute_data.
  SubsonicIteration(const BackgroundSolution& bg, const SupersonicField& F,
                    const InletPerturbation& pert, const Poly& P0,
                    const FixedDomain& fd, bool factor = true)
      : bg_(bg),
        F_(F),
        pert_(pert),
        P0_(P0),
        fd_(fd),
        co_(assemble_coefficients(bg, fd.n1)),
        bt_(bg, fd.n1) {
    fd.validate();
    if (factor) solver_.emplace(fd, co_);
  }

  const LinearOperatorCoefficients& coeffs() const { return co_; }
  const FixedDomain& domain() const { return fd_; }
  const PotentialSolver& solver() const {
    if (!solver_)
      throw SolveError("SubsonicIteration: constructed without a solver");
    return *solver_;
  }
  const BackgroundSolution& background() const { return bg_; }

  /// Upstream states, Bernoulli invariants, and jump remainders along the
  /// hat shock trace.
  TraceData compute_trace(const PerturbationState& hat,
                          const Grid2& theta) const {
    const int n2 = fd_.n2;
    TraceData tr;
    tr.up.resize(n2);
    tr.B.resize(n2);
    tr.R3.resize(n2);
    tr.R4.resize(n2);
    tr.R11.resize(n2);
    LinearJumpCoefficients jc;
    jc.e1 = co_.e1;
    jc.e2 = co_.e2;
    jc.a = co_.a;
    for (int j = 0; j < n2; ++j) {
      double s = fd_.s(j);
      tr.up[j] = evaluate_at_lagrangian(F_, bg_.r_b + hat.W6[j], s);
      tr.B[j] = bernoulli(tr.up[j], bg_.gas);
      TraceHatValues hv;
      hv.W1 = hat.W1[0][j];
      hv.W2 = hat.W2[0][j];
      hv.W4 = hat.W4[0][j];
      hv.W5 = hat.W5[0][j];
      hv.W6 = hat.W6[j];
      hv.theta = theta[0][j];
      TraceRemainders rem = trace_remainders(hv, s, tr.up[j], bg_, jc);
      tr.R3[j] = rem.R3;
      tr.R4[j] = rem.R4;
      tr.R11[j] = rem.R11;
    }
    tr.R12.resize(n2);
    auto tail = tail_integral_cellcentered(tr.R11, fd_.hs());
    for (int j = 0; j < n2; ++j) tr.R12[j] = -tail[j];
    return tr;
  }

  /// All nonlinear data of one iteration at the hat state: exact operators,
  /// linearized operators, the F/G right-hand sides, and the boundary data
  /// of the potential problem.
  IterationData compute_data(const PerturbationState& hat) const {
    const int n1 = fd_.n1, n2 = fd_.n2;
    const double h1 = fd_.h1(), hs = fd_.hs();
    const double N = fd_.N, rb = bg_.r_b;
    const GasConstants& g = bg_.gas;
    const double eps = pert_.epsilon;

    HatExtension hx(hat, fd_);
    IterationData d;
    d.theta = theta_hat_table(fd_, hx, bt_, bg_);
    d.trace = compute_trace(hat, d.theta);
    d.E1 = make_grid(n1, n2);
    d.E2 = make_grid(n1, n2);
    d.L1 = make_grid(n1, n2);
    d.L2 = make_grid(n1, n2);
    d.F3 = make_grid(n1, n2);
    d.F4 = make_grid(n1, n2);
    d.G1 = make_grid(n1, n2);
    d.G2 = make_grid(n1, n2);

    std::vector<double> dW6 = detail::d2profile(hat.W6, hs);
    for (int i = 0; i <= n1; ++i) {
      double z1 = fd_.z1(i);
      for (int j = 0; j < n2; ++j) {
        double s = fd_.s(j);
        double d1v = chart_d1(s, co_.kb);
        double W6j = hat.W6[j];
        double y1 = rb + z1 + (N - z1) / N * W6j;
        double th = d.theta[i][j];
        double sinth = std::sin(th), costh = std::cos(th);
        double varpi = hat.W2[i][j];
        double W4v = hat.W4[i][j], W5v = hat.W5[i][j];
        double U3 = hat.W3[i][j];
        double P = co_.Pb[i] + W4v;
        double S = bg_.S_plus + W5v;
        double rho = density_from_PS(P, S, g);
        double c2 = g.gamma * P / rho;
        // radial velocity eliminated through Bernoulli along the hat trace
        double U1sq = (2.0 * (d.trace.B[j] - enthalpy(P, S, g)) - U3 * U3) /
                      (1.0 + varpi * varpi);
        if (!(U1sq > 0.0) || !(c2 - U1sq > 0.0))
          throw SolveError(
              "subsonic iteration: state left the subsonic regime at z1=" +
              fmt17(z1) + ", z2=" + fmt17(s));
        double U1 = std::sqrt(U1sq);

        // z-derivatives of the hat fields (FD only on the perturbations)
        double d1W2 = detail::d1node(hat.W2, i, j, h1, n1);
        double d2W2 = detail::d2cell(hat.W2, i, j, hs, n2, -1);
        double d1W4 = detail::d1node(hat.W4, i, j, h1, n1);
        double d2W4 = detail::d2cell(hat.W4, i, j, hs, n2, +1);

        // chain rules of the shock-fitted chart
        double fac1 = N / (N - W6j);
        double cfac = dW6[j] * (N - z1) / (N - W6j);
        double dy1_varpi = fac1 * d1W2;
        double dy2_varpi = d2W2 - cfac * d1W2;
        double dz1P = co_.Pbp[i] + d1W4;
        double dy1_P = fac1 * dz1P;
        double dy2_P = d2W4 - cfac * dz1P;

        double cot = costh / sinth;
        double K = rho * c2 * U1sq / (y1 * (c2 - U1sq));
        d.E1[i][j] = dy1_varpi -
                     (y1 * rho * U1 * varpi * sinth / (2.0 * s)) * dy2_varpi -
                     varpi / y1 - varpi * varpi / y1 * cot +
                     (y1 * sinth / (2.0 * s * U1)) * dy2_P -
                     (varpi / (rho * c2)) * dy1_P -
                     (U3 * U3 / (y1 * U1sq)) * cot;
        d.E2[i][j] =
            dy1_P -
            K * (y1 * y1 * rho * U1 * sinth / (2.0 * s)) * dy2_varpi -
            (y1 * rho * c2 * U1 * varpi * sinth / (2.0 * s * (c2 - U1sq))) *
                dy2_P -
            K * (varpi * varpi + varpi * cot + 2.0) -
            rho * c2 * U3 * U3 / (y1 * (c2 - U1sq));

        // linearized operators at the hat state (hat shock slope included)
        double thb = background_theta(s, co_.kb);
        double sinb = std::sin(thb), cosb = std::cos(thb);
        d.L1[i][j] = d1W2 - co_.cL[i] * varpi +
                     ((rb + z1) / co_.Ub[i]) * d1v * d2W4 +
                     co_.kap3[i] * d1v * dW6[j];
        d.L2[i][j] =
            d1W4 -
            co_.K5[i] * d1v *
                (d2W2 + 2.0 * co_.kb * s * cosb / (sinb * sinb) * varpi) +
            co_.e4[i] * W4v + co_.e5[i] * W5v + co_.e6[i] * W6j;

        d.F3[i][j] =
            d.L1[i][j] - d.E1[i][j] - co_.kap3[i] * d1v * d.trace.R11[j];
        d.F4[i][j] = d.L2[i][j] - d.E2[i][j] -
                     (co_.e6[i] + co_.e2 * co_.e5[i]) * d.trace.R12[j] -
                     co_.e5[i] * d.trace.R4[j];
        d.G1[i][j] = co_.lam1[i] * d.F3[i][j];
        d.G2[i][j] = co_.lam4[i] * d.F4[i][j];
      }
    }

    // weighted tail integrals J1(z1, z2) = int_{z2}^M (2s/sin(thb)) G1 ds
    d.J1 = make_grid(n1, n2);
    {
      std::vector<double> f(n2);
      for (int i = 0; i <= n1; ++i) {
        for (int j = 0; j < n2; ++j)
          f[j] = d.G1[i][j] / chart_d1(fd_.s(j), co_.kb);
        auto tail = tail_integral_cellcentered(f, hs);
        for (int j = 0; j < n2; ++j) d.J1[i][j] = tail[j];
      }
    }

    // boundary data of the potential problem
    d.g1.resize(n2);
    d.g2.resize(n2);
    d.g3.resize(n1 + 1);
    for (int j = 0; j < n2; ++j) {
      double G3 = co_.e1 * d.trace.R12[j] + d.trace.R3[j];
      d.g1[j] = co_.lam2[0] * G3 + d.J1[0][j];
      double G4 = P0_(d.theta[n1][j]);
      d.g2[j] = eps * co_.lam2[n1] * G4 + d.J1[n1][j];
    }
    double sinM = 2.0 * fd_.M * chart_d1(fd_.M, co_.kb);  // sin(thb(M))
    for (int i = 0; i <= n1; ++i) {
      double z1 = fd_.z1(i);
      double sharp = rb + z1 + (N - z1) / N * hat.W6M;
      double G5 = sharp * pert_.f.deriv(sharp - bg_.geom.r1);
      d.g3[i] = -(2.0 * fd_.M / sinM) * co_.lam1[i] * eps * G5;
    }

    // interior right-hand side G2 + d/dz1(a1 J1)
    d.rhs = make_grid(n1, n2);
    for (int i = 1; i < n1; ++i)
      for (int j = 0; j < n2; ++j)
        d.rhs[i][j] = d.G2[i][j] + (co_.a1c[i + 1] * d.J1[i + 1][j] -
                                    co_.a1c[i - 1] * d.J1[i - 1][j]) /
                                       (2.0 * h1);
    return d;
  }

  /// One application of the iteration map.
  PerturbationState apply(const PerturbationState& hat) const {
    return apply_from_data(hat, compute_data(hat));
  }

  /// Apply the map with precomputed iteration data for the same hat state.
  PerturbationState apply_from_data(const PerturbationState& hat,
                                    const IterationData& d) const {
    const int n1 = fd_.n1, n2 = fd_.n2;
    PotentialSolution ps = solver().solve(d.rhs, d.g1, d.g2, d.g3);
    PerturbationState out = PerturbationState::zero(n1, n2);
    double W6M = 0.0;
    recover_W2_W4(fd_, co_, ps, d.J1, d.g1, d.g2, d.g3, &out.W2, &out.W4,
                  &W6M);
    out.W6M = W6M;

    // shock displacement transported from the new trace flow angle
    std::vector<double> f(n2);
    for (int j = 0; j < n2; ++j)
      f[j] = out.W2[0][j] / chart_d1(fd_.s(j), co_.kb);
    auto tail = tail_integral_cellcentered(f, fd_.hs());
    for (int j = 0; j < n2; ++j)
      out.W6[j] = W6M - co_.a * tail[j] + d.trace.R12[j];

    const GasConstants& g = bg_.gas;
    const double N = fd_.N, rb = bg_.r_b;
    for (int j = 0; j < n2; ++j) {
      double W5row = co_.e2 * out.W6[j] + d.trace.R4[j];
      double diam = rb + hat.W6[j];
      double sin0 = std::sin(d.theta[0][j]);
      for (int i = 0; i <= n1; ++i) {
        out.W5[i][j] = W5row;  // entropy is transported radially
        double z1 = fd_.z1(i);
        double sharp = rb + z1 + (N - z1) / N * hat.W6[j];
        out.W3[i][j] = (diam / sharp) * (sin0 / std::sin(d.theta[i][j])) *
                       d.trace.up[j].U3;
        // Bernoulli balance for the radial velocity perturbation
        double dh = enthalpy(co_.Pb[i] + out.W4[i][j],
                             bg_.S_plus + out.W5[i][j], g) -
                    enthalpy(co_.Pb[i], bg_.S_plus, g);
        double Ub = co_.Ub[i];
        double q = hat.W1[i][j] * hat.W1[i][j] +
                   (Ub + hat.W1[i][j]) * (Ub + hat.W1[i][j]) * hat.W2[i][j] *
                       hat.W2[i][j] +
                   hat.W3[i][j] * hat.W3[i][j];
        out.W1[i][j] = (d.trace.B[j] - bg_.B - dh) / Ub - q / (2.0 * Ub);
      }
    }
    return out;
  }

 private:
  BackgroundSolution bg_;
  const SupersonicField& F_;
  InletPerturbation pert_;
  Poly P0_;
  FixedDomain fd_;
  LinearOperatorCoefficients co_;
  BackgroundTables bt_;
  std::optional<PotentialSolver> solver_;
};

// ---------------------------------------------------------------------------
// Fixed-point driver
// ---------------------------------------------------------------------------

inline std::pair<PerturbationState, IterationReport> fixed_point_iterate(
    const SubsonicIteration& it, double epsilon,
    const SubsonicOptions& opts = {}) {
  const BackgroundSolution& bg = it.background();
  const FixedDomain& fd = it.domain();
  IterationReport rep;
  rep.logdet = it.solver().logdet();
  double eps = std::abs(epsilon);
  double scale = std::max({1.0, bg.sub(bg.r_b).U1, bg.sub(bg.r_b).P});
  rep.tol = (opts.tol > 0.0) ? opts.tol : std::max(1e-8 * eps, 2e-12);
  rep.delta =
      (opts.delta > 0.0) ? opts.delta : 10.0 * std::max(eps, 1e-6) * scale;

  PerturbationState W = PerturbationState::zero(fd.n1, fd.n2);
  double prev_update = 0.0;
  int bad = 0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    IterationData d = it.compute_data(W);
    double res = 0.0;
    for (int i = 0; i <= fd.n1; ++i)
      for (int j = 0; j < fd.n2; ++j)
        res = std::max({res, std::abs(d.F3[i][j]), std::abs(d.F4[i][j])});
    PerturbationState Wn = it.apply_from_data(W, d);
    double nw = state_norm(Wn);
    if (!(nw <= rep.delta))
      throw SolveError("fixed_point_solve: iterate left the trust region (" +
                       fmt17(nw) + " > " + fmt17(rep.delta) + ")");
    double upd = state_norm(state_diff(Wn, W));
    IterationEntry e;
    e.k = k;
    e.norm = nw;
    e.update = upd;
    e.ratio = (k > 1 && prev_update > 0.0) ? upd / prev_update : 0.0;
    e.residual = res;
    rep.entries.push_back(e);
    W = Wn;
    rep.iters = k;
    rep.final_update = upd;
    if (upd < rep.tol) {
      rep.converged = true;
      break;
    }
    if (k > 1 && e.ratio >= 1.0 && upd > 10.0 * rep.tol) {
      if (++bad >= 3)
        throw SolveError(
            "fixed_point_solve: diverging update sequence (ratio " +
            fmt17(e.ratio) + " at iteration " + std::to_string(k) + ")");
    } else {
      bad = 0;
    }
    prev_update = upd;
  }
  if (!rep.converged)
    throw SolveError("fixed_point_solve: no convergence in " +
                     std::to_string(opts.max_iter) + " iterations (update " +
                     fmt17(rep.final_update) + ")");
  return {W, rep};
}

inline std::pair<PerturbationState, IterationReport> fixed_point_solve(
    const BackgroundSolution& bg, const SupersonicField& F,
    const InletPerturbation& pert, const Poly& P0, const FixedDomain& fd,
    const SubsonicOptions& opts = {}) {
  SubsonicIteration it(bg, F, pert, P0, fd);
  return fixed_point_iterate(it, pert.epsilon, opts);
}

/// Fixed computational domain for a marched supersonic field: N = r2 - r_b,
/// M from the (possibly perturbed) inlet mass flux.
inline FixedDomain make_fixed_domain(const BackgroundSolution& bg,
                                     const SupersonicField& F, int n1,
                                     int n2) {
  FixedDomain fd;
  fd.N = bg.N();
  std::vector<double> rhoU1(F.nsig + 1);
  for (int j = 0; j <= F.nsig; ++j) {
    FlowState st = F.state_at(0, j);
    rhoU1[j] = density(st, F.gas) * st.U1;
  }
  fd.M = total_flux(rhoU1, F.geom.theta0, F.geom.r1);
  fd.n1 = n1;
  fd.n2 = n2;
  fd.validate();
  return fd;
}

}  // namespace tsn

#endif  // TSN_SUBSONIC_HPP_
